//! Closed-form asymptotics used as references for measured spectra and
//! thermodynamics.

use serde::{Deserialize, Serialize};

use crate::error::{QremError, Result};
use crate::hypercube::{binary_entropy, binomial};

/// `β_c = √(2 ln 2)`.
pub fn beta_c() -> f64 {
    (2.0 * std::f64::consts::LN_2).sqrt()
}

pub fn p_rem(beta: f64) -> f64 {
    let bc = beta_c();
    if beta <= bc {
        beta * beta / 2.0
    } else {
        bc * bc / 2.0 + (beta - bc) * bc
    }
}

/// `ln cosh x`, overflow-free.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

pub fn p_par(beta_gamma: f64) -> f64 {
    ln_cosh(beta_gamma)
}

/// `arcosh(1 + y)` without cancellation for small `y`.
fn arcosh_1p(y: f64) -> f64 {
    (y + (y * (y + 2.0)).sqrt()).ln_1p()
}

/// `Γ_c(β) = arcosh(exp p^REM(β)) / β`, with `Γ_c(0) = 1`.
pub fn gamma_c(beta: f64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    if beta < 1e-4 {
        // arcosh(e^{β²/2}) = β(1 + β²/12 + O(β⁴)) for small β.
        return 1.0 + beta * beta / 12.0;
    }
    arcosh_1p((p_rem(beta)).exp_m1()) / beta
}

/// Limit of `Φ_N/N`: `max{p^REM(β), p^PAR(βΓ)}`.
pub fn pressure_limit(beta: f64, gamma: f64) -> f64 {
    p_rem(beta).max(p_par(beta * gamma))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    RemClassical,
    RemFrozen,
    QuantumParamagnet,
    CriticalLine,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub beta: f64,
    pub gamma: f64,
    pub regime: Regime,
}

/// Relative distance to `Γ_c(β)` treated as on the critical line.
const CRITICAL_TOL: f64 = 1e-9;

pub fn phase_point(beta: f64, gamma: f64) -> PhasePoint {
    let gc = gamma_c(beta);
    let regime = if (gamma - gc).abs() <= CRITICAL_TOL * gc.max(1.0) {
        Regime::CriticalLine
    } else if gamma > gc {
        Regime::QuantumParamagnet
    } else if beta > beta_c() {
        Regime::RemFrozen
    } else {
        Regime::RemClassical
    };
    PhasePoint {
        beta,
        gamma,
        regime,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamagneticLevel {
    pub n: usize,
    pub center: f64,
    pub multiplicity: u128,
}

/// Centers `(2n−N)Γ + N/((2n−N)Γ)` for every `n` with `(2n−N)Γ < −(β_c+2η)N`.
/// The flag is set when `Γ ≤ β_c`, where the centers carry no guarantee.
pub fn paramagnetic_levels(n: usize, gamma: f64, eta: f64) -> (Vec<ParamagneticLevel>, bool) {
    let nf = n as f64;
    let threshold = -(beta_c() + 2.0 * eta) * nf;
    let levels = (0..=n)
        .filter_map(|k| {
            let t = (2.0 * k as f64 - nf) * gamma;
            (t < threshold).then(|| ParamagneticLevel {
                n: k,
                center: t + nf / t,
                multiplicity: binomial(n, k),
            })
        })
        .collect();
    (levels, gamma <= beta_c())
}

/// `Γ_N = −min U/N + (N/min U − min U/N)/N`.
pub fn critical_field(n: usize, min_u: f64) -> f64 {
    let nf = n as f64;
    -min_u / nf + (nf / min_u - min_u / nf) / nf
}

pub fn paramagnetic_ground_energy(n: usize, gamma: f64) -> f64 {
    -gamma * n as f64 - 1.0 / gamma
}

pub fn spin_glass_energy(n: usize, gamma: f64, u: f64) -> f64 {
    u + gamma * gamma * n as f64 / u
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "kebab-case")]
pub enum GroundStatePrediction {
    Paramagnet { energy: f64 },
    SpinGlass { energy: f64 },
    /// Within `1/N` of `Γ_N`: both candidate energies.
    Critical { paramagnet: f64, spin_glass: f64 },
}

impl GroundStatePrediction {
    /// The lower candidate, which is the predicted ground energy in every
    /// branch.
    pub fn energy(&self) -> f64 {
        match *self {
            Self::Paramagnet { energy } | Self::SpinGlass { energy } => energy,
            Self::Critical {
                paramagnet,
                spin_glass,
            } => paramagnet.min(spin_glass),
        }
    }
}

pub fn ground_state_prediction(n: usize, gamma: f64, min_u: f64) -> GroundStatePrediction {
    if gamma == 0.0 {
        return GroundStatePrediction::SpinGlass { energy: min_u };
    }
    let para = paramagnetic_ground_energy(n, gamma);
    let glass = spin_glass_energy(n, gamma, min_u);
    if (gamma - critical_field(n, min_u)).abs() <= 1.0 / n as f64 {
        GroundStatePrediction::Critical {
            paramagnet: para,
            spin_glass: glass,
        }
    } else if gamma > beta_c() {
        GroundStatePrediction::Paramagnet { energy: para }
    } else {
        GroundStatePrediction::SpinGlass { energy: glass }
    }
}

/// Order-one limit of `Φ_N(β,Γ) − N p^PAR` (paramagnet) or
/// `Φ_N(β,Γ) − Φ_N(β,0)` (REM branches).
pub fn free_energy_correction(beta: f64, gamma: f64) -> Result<f64> {
    let pt = phase_point(beta, gamma);
    match pt.regime {
        Regime::QuantumParamagnet => {
            let x = beta * gamma;
            Ok(if x == 0.0 {
                // β/(Γ tanh βΓ) → 1/Γ² as β → 0.
                1.0 / (gamma * gamma)
            } else {
                beta / (gamma * x.tanh())
            })
        }
        Regime::RemClassical => Ok(gamma * gamma),
        Regime::RemFrozen => Ok(gamma * gamma * beta / beta_c()),
        Regime::CriticalLine => Err(QremError::InvalidArgument(format!(
            "(β, Γ) = ({beta}, {gamma}) lies on the critical line"
        ))),
    }
}

/// `2^{−N} exp(N γ((1+ν)/2))` with `ν = E/N + v`, for `E ∈ [−N(1+v), −vN]`.
pub fn deloc_bound(energy: f64, v: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    if !(0.0..1.0).contains(&v) {
        return Err(QremError::InvalidArgument(format!(
            "need 0 <= v < 1, got {v}"
        )));
    }
    let (lo, hi) = (-nf * (1.0 + v), -v * nf);
    if energy < lo || energy > hi {
        return Err(QremError::InvalidArgument(format!(
            "energy {energy} outside [{lo}, {hi}]"
        )));
    }
    let nu = (energy / nf + v).clamp(-1.0, 0.0);
    Ok((nf * (binary_entropy((1.0 + nu) / 2.0)? - std::f64::consts::LN_2)).exp())
}

/// `P(X ≤ x)` for the largest point of a Poisson process with intensity `e^{−x}dx`.
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

/// Natural log of the prefactor multiplying `Z_N(β,Γ)` in the frozen phase.
pub fn ln_ruelle_prefactor(n: usize, beta: f64, gamma: f64) -> Result<f64> {
    let bc = beta_c();
    if beta <= bc {
        return Err(QremError::InvalidArgument(format!(
            "prefactor needs β > β_c, got {beta}"
        )));
    }
    let nf = n as f64;
    let log_term = (nf * std::f64::consts::LN_2).ln() + (4.0 * std::f64::consts::PI).ln();
    Ok(-nf * (beta * bc - std::f64::consts::LN_2) + beta / (2.0 * bc) * log_term
        - beta * gamma * gamma / bc)
}

pub fn ruelle_prefactor(n: usize, beta: f64, gamma: f64) -> Result<f64> {
    Ok(ln_ruelle_prefactor(n, beta, gamma)?.exp())
}

/// One row of the phase-diagram export.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub beta: f64,
    pub gamma: f64,
    pub regime: Regime,
    pub pressure: f64,
    pub correction: Option<f64>,
}

pub fn phase_row(beta: f64, gamma: f64) -> PhaseRow {
    PhaseRow {
        beta,
        gamma,
        regime: phase_point(beta, gamma).regime,
        pressure: pressure_limit(beta, gamma),
        correction: free_energy_correction(beta, gamma).ok(),
    }
}
