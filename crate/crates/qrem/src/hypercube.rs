//! Configurations of the Hamming cube, the adjacency operator `T` and its
//! Hadamard diagonalization.
//!
//! Bit `j` of a configuration is set when `σ_j = −1`. Flipping spin `j` is an
//! XOR with `1 << j`, and the Hamming distance is a popcount.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{QremError, Result};

pub const MAX_N: usize = 30;

/// Largest `N` for which binomials are tabulated.
const BINOM_ROWS: usize = 64;

pub fn check_dimension(n: usize) -> Result<()> {
    if (1..=MAX_N).contains(&n) {
        Ok(())
    } else {
        Err(QremError::DimensionOutOfRange(n))
    }
}

fn pascal() -> &'static Vec<Vec<u128>> {
    static TABLE: OnceLock<Vec<Vec<u128>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(BINOM_ROWS + 1);
        for n in 0..=BINOM_ROWS {
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        rows
    })
}

/// Exact `C(n, k)`, zero for `k > n`. Panics for `n > 64`.
pub fn binomial(n: usize, k: usize) -> u128 {
    assert!(n <= BINOM_ROWS, "binomial table holds n <= {BINOM_ROWS}");
    if k > n {
        0
    } else {
        pascal()[n][k]
    }
}

/// `C(n, k)` as a float; exact up to `n = 64`, log-gamma beyond.
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    if n <= BINOM_ROWS {
        binomial(n, k) as f64
    } else if k > n {
        0.0
    } else {
        statrs::function::factorial::ln_binomial(n as u64, k as u64).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub bits: u32,
    pub n: usize,
}

impl Configuration {
    pub fn new(bits: u32, n: usize) -> Result<Self> {
        check_dimension(n)?;
        if (bits as u64) >> n != 0 {
            return Err(QremError::InvalidArgument(format!(
                "bits {bits:#x} do not fit in N = {n}"
            )));
        }
        Ok(Self { bits, n })
    }

    /// The all-up configuration (every `σ_j = +1`).
    pub fn origin(n: usize) -> Result<Self> {
        Self::new(0, n)
    }

    pub fn flip(self, j: usize) -> Self {
        debug_assert!(j < self.n);
        Self {
            bits: self.bits ^ (1 << j),
            n: self.n,
        }
    }

    /// `σ_j ∈ {−1, +1}`.
    pub fn spin(self, j: usize) -> i8 {
        if self.bits >> j & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub fn distance(self, other: Self) -> usize {
        (self.bits ^ other.bits).count_ones() as usize
    }

    pub fn index(self) -> usize {
        self.bits as usize
    }
}

pub fn hamming_distance(a: u32, b: u32) -> usize {
    (a ^ b).count_ones() as usize
}

/// Real amplitudes over the `2^N` configurations. Normalization is never
/// implied; call [`StateVector::norm`] when it matters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub amplitudes: Vec<f64>,
    pub n: usize,
}

impl StateVector {
    pub fn zeros(n: usize) -> Result<Self> {
        check_dimension(n)?;
        Ok(Self {
            amplitudes: vec![0.0; 1 << n],
            n,
        })
    }

    pub fn from_vec(n: usize, amplitudes: Vec<f64>) -> Result<Self> {
        check_dimension(n)?;
        if amplitudes.len() != 1 << n {
            return Err(QremError::DimensionMismatch {
                expected: 1 << n,
                got: amplitudes.len(),
            });
        }
        Ok(Self { amplitudes, n })
    }

    pub fn delta(sigma: Configuration) -> Self {
        let mut amplitudes = vec![0.0; 1 << sigma.n];
        amplitudes[sigma.index()] = 1.0;
        Self {
            amplitudes,
            n: sigma.n,
        }
    }

    /// The fully paramagnetic state `Φ_∅`, constant `2^{−N/2}`.
    pub fn phi_empty(n: usize) -> Result<Self> {
        check_dimension(n)?;
        let c = (-(n as f64) / 2.0 * std::f64::consts::LN_2).exp();
        Ok(Self {
            amplitudes: vec![c; 1 << n],
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.amplitudes, &self.amplitudes).sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(dot(&self.amplitudes, &other.amplitudes))
    }

    pub fn normalized(mut self) -> Self {
        let nrm = self.norm();
        if nrm > 0.0 {
            self.amplitudes.iter_mut().for_each(|a| *a /= nrm);
        }
        self
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(QremError::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y(σ) += scale · Σ_j x(F_j σ)`. The innermost loops run over contiguous
/// half-blocks so they vectorize.
pub fn adjacency_accumulate(n: usize, x: &[f64], y: &mut [f64], scale: f64) {
    debug_assert_eq!(x.len(), 1 << n);
    debug_assert_eq!(y.len(), 1 << n);
    for j in 0..n {
        let h = 1usize << j;
        for (yb, xb) in y.chunks_exact_mut(2 * h).zip(x.chunks_exact(2 * h)) {
            let (ylo, yhi) = yb.split_at_mut(h);
            let (xlo, xhi) = xb.split_at(h);
            for (yv, xv) in ylo.iter_mut().zip(xhi) {
                *yv += scale * xv;
            }
            for (yv, xv) in yhi.iter_mut().zip(xlo) {
                *yv += scale * xv;
            }
        }
    }
}

/// `(Tψ)(σ) = −Σ_j ψ(F_j σ)`, matrix-free.
pub fn apply_t(v: &StateVector) -> Result<StateVector> {
    check_dimension(v.n)?;
    if v.len() != 1 << v.n {
        return Err(QremError::DimensionMismatch {
            expected: 1 << v.n,
            got: v.len(),
        });
    }
    let mut out = vec![0.0; v.len()];
    adjacency_accumulate(v.n, &v.amplitudes, &mut out, -1.0);
    Ok(StateVector {
        amplitudes: out,
        n: v.n,
    })
}

/// In-place orthonormal Walsh-Hadamard transform of a length-`2^N` slice.
pub fn fwht_in_place(a: &mut [f64]) {
    let len = a.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for block in a.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*x + *y, *x - *y);
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (len as f64).sqrt();
    a.iter_mut().for_each(|x| *x *= scale);
}

/// Maps configuration amplitudes to coefficients in the parity basis
/// `Φ_A(σ) = 2^{−N/2} Π_{j∈A} σ_j`, where `A` is read as a bit mask. The map
/// is its own inverse.
pub fn hadamard_transform(v: &StateVector) -> Result<StateVector> {
    let mut out = StateVector::from_vec(v.n, v.amplitudes.clone())?;
    fwht_in_place(&mut out.amplitudes);
    Ok(out)
}

/// Eigenvalue of `T` on the parity mode `A`.
pub fn parity_eigenvalue(n: usize, a_bits: u32) -> i64 {
    2 * a_bits.count_ones() as i64 - n as i64
}

/// `{(2n − N, C(N, n))}` for `n = 0..=N`, in increasing eigenvalue order.
pub fn t_spectrum(n: usize) -> Vec<(i64, u128)> {
    (0..=n)
        .map(|k| (2 * k as i64 - n as i64, binomial(n, k)))
        .collect()
}

/// `γ(x) = −x ln x − (1−x) ln(1−x)`, extended by continuity to the endpoints.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(QremError::InvalidArgument(format!(
            "binary entropy needs x in [0,1], got {x}"
        )));
    }
    let term = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    Ok(term(x) + term(1.0 - x))
}

/// Masks with exactly `r` of the low `n` bits set, in increasing order
/// (Gosper's hack).
#[derive(Clone, Debug)]
pub struct FixedWeightMasks {
    next: Option<u64>,
    limit: u64,
}

impl FixedWeightMasks {
    pub fn new(n: usize, r: usize) -> Self {
        let limit = 1u64 << n;
        let next = if r > n {
            None
        } else {
            Some((1u64 << r) - 1)
        };
        Self { next, limit }
    }
}

impl Iterator for FixedWeightMasks {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        let cur = self.next?;
        if cur >= self.limit {
            self.next = None;
            return None;
        }
        self.next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            Some((((r ^ cur) >> 2) / c) | r)
        };
        Some(cur as u32)
    }
}

/// Configurations at Hamming distance exactly `r` from `center`.
pub fn sphere(center: Configuration, r: usize) -> Result<impl Iterator<Item = Configuration>> {
    if r > center.n {
        return Err(QremError::InvalidArgument(format!(
            "sphere radius {r} exceeds N = {}",
            center.n
        )));
    }
    let n = center.n;
    Ok(FixedWeightMasks::new(n, r).map(move |m| Configuration {
        bits: center.bits ^ m,
        n,
    }))
}

/// `B_R(center)` as the disjoint union of spheres `0..=R`; `R` is clamped to `N`.
pub fn ball(center: Configuration, radius: usize) -> impl Iterator<Item = Configuration> {
    let n = center.n;
    (0..=radius.min(n)).flat_map(move |r| {
        FixedWeightMasks::new(n, r).map(move |m| Configuration {
            bits: center.bits ^ m,
            n,
        })
    })
}

/// `|B_R| = Σ_{r ≤ R} C(N, r)`.
pub fn ball_volume(n: usize, radius: usize) -> u128 {
    (0..=radius.min(n)).map(|r| binomial(n, r)).sum()
}
