//! REM disorder realizations `U(σ) = √N ω(σ)`, truncations, large-deviation
//! sets and the extreme-value rescaling `s_N`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{QremError, Result};
use crate::hypercube::{check_dimension, Configuration};
use crate::predictions::beta_c;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truncation {
    /// `U·1[|U| ≤ level·N]`.
    TwoSidedAbs { level: f64 },
    /// `U·1[U ≥ −level·N]`.
    KeepAbove { level: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationKind {
    TwoSidedAbs,
    KeepAbove,
}

impl std::str::FromStr for TruncationKind {
    type Err = QremError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_sided_abs" => Ok(Self::TwoSidedAbs),
            "keep_above" => Ok(Self::KeepAbove),
            other => Err(QremError::InvalidArgument(format!(
                "unknown truncation kind `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderField {
    pub values: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    pub truncation: Option<Truncation>,
    /// Drawn by [`sample_rem`] (false for hand-built values).
    pub sampled: bool,
}

/// Standard normal field scaled by `√N`, keyed by `(seed, σ.bits)`.
pub fn sample_rem(n: usize, seed: u64) -> Result<DisorderField> {
    check_dimension(n)?;
    let scale = (n as f64).sqrt();
    let mut values = rng::omega_field(seed, 1 << n);
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(DisorderField {
        values,
        n,
        seed,
        truncation: None,
        sampled: true,
    })
}

/// `U(σ)` of [`sample_rem`] for one configuration, without the full array.
pub fn rem_value(seed: u64, sigma: Configuration) -> f64 {
    (sigma.n as f64).sqrt() * rng::omega_at(seed, sigma.bits)
}

impl DisorderField {
    /// Wraps hand-built values (planted holes, zero fields).
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        check_dimension(n)?;
        if values.len() != 1 << n {
            return Err(QremError::DimensionMismatch {
                expected: 1 << n,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(QremError::InvalidArgument(format!(
                "non-finite disorder value {v}"
            )));
        }
        Ok(Self {
            values,
            n,
            seed: 0,
            truncation: None,
            sampled: false,
        })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::from_values(n, vec![0.0; 1 << n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, sigma: Configuration) -> f64 {
        self.values[sigma.index()]
    }

    pub fn config(&self, bits: u32) -> Configuration {
        Configuration { bits, n: self.n }
    }

    /// `(σ_min, min U)`; ties go to the smallest bit mask.
    pub fn argmin(&self) -> (Configuration, f64) {
        let mut best = 0usize;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        (self.config(best as u32), self.values[best])
    }

    pub fn min(&self) -> f64 {
        self.argmin().1
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn truncate(&self, kind: TruncationKind, level: f64) -> Result<Self> {
        if !(level > 0.0) {
            return Err(QremError::InvalidArgument(format!(
                "truncation level must be positive, got {level}"
            )));
        }
        let cut = level * self.n as f64;
        let keep: Box<dyn Fn(f64) -> bool> = match kind {
            TruncationKind::TwoSidedAbs => Box::new(move |u: f64| u.abs() <= cut),
            TruncationKind::KeepAbove => Box::new(move |u: f64| u >= -cut),
        };
        let values = self
            .values
            .iter()
            .map(|&u| if keep(u) { u } else { 0.0 })
            .collect();
        let truncation = Some(match kind {
            TruncationKind::TwoSidedAbs => Truncation::TwoSidedAbs { level },
            TruncationKind::KeepAbove => Truncation::KeepAbove { level },
        });
        Ok(Self {
            values,
            n: self.n,
            seed: self.seed,
            truncation,
            sampled: self.sampled,
        })
    }

    /// `L_ε = {U ≤ −εN}`, or `S_ε = {|U| ≥ εN}` when symmetrized; sorted by
    /// energy, then bits.
    pub fn large_deviation_set(&self, eps: f64, symmetrized: bool) -> Vec<Configuration> {
        let cut = eps * self.n as f64;
        let mut out: Vec<u32> = (0..self.len() as u32)
            .filter(|&b| {
                let u = self.values[b as usize];
                if symmetrized {
                    u.abs() >= cut
                } else {
                    u <= -cut
                }
            })
            .collect();
        out.sort_by(|&a, &b| {
            self.values[a as usize]
                .total_cmp(&self.values[b as usize])
                .then(a.cmp(&b))
        });
        out.into_iter().map(|b| self.config(b)).collect()
    }

    /// `w_N = E[U(σ)²]` under the (possibly truncated) Gaussian law for
    /// sampled fields; the mean of `U²` over the cube for hand-built ones.
    pub fn variance_parameter(&self) -> f64 {
        if !self.sampled {
            return self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64;
        }
        let nf = self.n as f64;
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        match self.truncation {
            None => nf,
            Some(Truncation::TwoSidedAbs { level }) => {
                let a = level * nf.sqrt();
                nf * ((2.0 * std.cdf(a) - 1.0) - 2.0 * a * std.pdf(a))
            }
            Some(Truncation::KeepAbove { level }) => {
                let a = level * nf.sqrt();
                nf * (1.0 - std.cdf(-a) - a * std.pdf(a))
            }
        }
    }

    pub fn neighbor_stats(&self, sigma: Configuration) -> NeighborStats {
        let n = self.n as f64;
        let (mut abs_sum, mut sum) = (0.0, 0.0);
        for j in 0..self.n {
            let u = self.values[(sigma.bits ^ (1 << j)) as usize];
            abs_sum += u.abs();
            sum += u;
        }
        NeighborStats {
            u: abs_sum / (n * n),
            z: sum / n,
        }
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(HEADER_LEN + 8 * self.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.n as u32).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        let (tag, level) = match self.truncation {
            None => (0u8, 0.0),
            Some(Truncation::TwoSidedAbs { level }) => (1, level),
            Some(Truncation::KeepAbove { level }) => (2, level),
        };
        buf.push(tag);
        buf.push(self.sampled as u8);
        buf.extend_from_slice(&[0u8; 6]);
        buf.extend_from_slice(&level.to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        let sidecar = Sidecar {
            format: "qrem-disorder".into(),
            version: FORMAT_VERSION,
            n: self.n,
            seed: self.seed,
            truncation: self.truncation,
            sampled: self.sampled,
            generator: GENERATOR.into(),
            count: self.len(),
        };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let buf = fs::read(path)?;
        if buf.len() < HEADER_LEN || &buf[..8] != MAGIC {
            return Err(QremError::Format("bad magic or short header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != FORMAT_VERSION {
            return Err(QremError::Format(format!("unsupported version {version}")));
        }
        let n = u32_at(12) as usize;
        check_dimension(n)?;
        let seed = u64::from_le_bytes(buf[16..24].try_into().unwrap());
        let level = f64::from_le_bytes(buf[32..40].try_into().unwrap());
        let truncation = match buf[24] {
            0 => None,
            1 => Some(Truncation::TwoSidedAbs { level }),
            2 => Some(Truncation::KeepAbove { level }),
            t => return Err(QremError::Format(format!("unknown truncation tag {t}"))),
        };
        let body = &buf[HEADER_LEN..];
        if body.len() != 8 << n {
            return Err(QremError::Format(format!(
                "expected {} values, found {} bytes",
                1usize << n,
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            values,
            n,
            seed,
            truncation,
            sampled: buf[25] == 1,
        })
    }
}

const MAGIC: &[u8; 8] = b"QREMDIS\0";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 40;
const GENERATOR: &str = "chacha20 counter at sigma.bits, inverse normal cdf, scaled by sqrt(N)";

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    n: usize,
    seed: u64,
    truncation: Option<Truncation>,
    sampled: bool,
    generator: String,
    count: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// `u(σ) = N^{−2} Σ_{S_1(σ)} |U|` and the signed mean `Z_σ = N^{−1} Σ_{S_1(σ)} U`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborStats {
    pub u: f64,
    pub z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledExtreme {
    pub x: f64,
    pub gamma: f64,
    pub n: usize,
}

/// `s_N(x; Γ) = −β_c N + [ln(N ln 2) + ln 4π]/(2β_c) − Γ²/β_c − x/β_c`.
pub fn s_n(x: f64, n: usize, gamma: f64) -> f64 {
    let bc = beta_c();
    let nf = n as f64;
    -bc * nf + ((nf * std::f64::consts::LN_2).ln() + (4.0 * std::f64::consts::PI).ln()) / (2.0 * bc)
        - gamma * gamma / bc
        - x / bc
}

/// Inverse of [`s_n`] in `x`.
pub fn rescale(energy: f64, n: usize, gamma: f64) -> Result<RescaledExtreme> {
    if n < 2 {
        return Err(QremError::InvalidArgument(format!(
            "rescaling needs N >= 2, got {n}"
        )));
    }
    let x = (s_n(0.0, n, gamma) - energy) * beta_c();
    Ok(RescaledExtreme { x, gamma, n })
}
