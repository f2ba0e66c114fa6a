//! Green functions of `T` on Hamming balls via the backward Riccati recursion,
//! the renormalized recursion, and rank-one ball ground states of `ΓT + U`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{QremError, Result};
use crate::hypercube::{binomial_f64, hamming_distance, Configuration, StateVector};
use crate::krylov::{conjugate_gradient, lanczos, LanczosOptions};
use crate::operators::{CompiledOperator, LinearOperator, OperatorSpec};
use crate::predictions::beta_c;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenProfile {
    pub k: usize,
    pub n: usize,
    pub energy: f64,
    /// `Γ_K(d;E)` for `d = 0..=K`.
    pub factors: Vec<f64>,
    /// `G_K(d;E) = Π_{j≤d} Γ_K(j;E)`.
    pub green: Vec<f64>,
    /// `Γ̂_K(d;E)`, from the renormalized recursion.
    pub renormalized_factors: Vec<f64>,
    /// `Ĝ_K(d;E) = Π_{j≤d} Γ̂_K(j;E)`, equal to `√C(N,d) G_K(d;E)`.
    pub renormalized: Vec<f64>,
}

/// Radial reduction of `T_K`: symmetric tridiagonal on normalized sphere
/// indicators, with couplings `−√((d+1)(N−d))`.
pub fn radial_t_matrix(k: usize, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k + 1, k + 1);
    for d in 0..k {
        let c = -(((d + 1) * (n - d)) as f64).sqrt();
        m[(d, d + 1)] = c;
        m[(d + 1, d)] = c;
    }
    m
}

/// `‖T_K‖`, the Perron eigenvalue of the radial reduction.
pub fn t_ball_norm(k: usize, n: usize) -> Result<f64> {
    if k > n {
        return Err(QremError::InvalidArgument(format!("radius {k} exceeds N = {n}")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let ev = radial_t_matrix(k, n).symmetric_eigenvalues();
    Ok(-ev.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn riccati_profile(k: usize, n: usize, energy: f64) -> Result<GreenProfile> {
    if k > n {
        return Err(QremError::InvalidArgument(format!("radius {k} exceeds N = {n}")));
    }
    let safe = 2 * k <= n && energy < -2.0 * ((k * (n - k + 1)) as f64).sqrt();
    if !safe {
        let norm = t_ball_norm(k, n)?;
        if energy >= -norm {
            return Err(QremError::EnergyInSpectrum {
                energy,
                detail: format!("need E < −‖T_K‖ = {}", -norm),
            });
        }
    }
    let nf = n as f64;
    let mut factors = vec![0.0; k + 1];
    let mut next = 0.0;
    for d in (0..=k).rev() {
        let den = -energy - (nf - d as f64) * next;
        if !(den > 0.0) {
            return Err(QremError::EnergyInSpectrum {
                energy,
                detail: format!("Riccati denominator lost its sign at d = {d}"),
            });
        }
        factors[d] = d.max(1) as f64 / den;
        next = factors[d];
    }
    let mut renormalized_factors = vec![0.0; k + 1];
    renormalized_factors[0] = factors[0];
    let mut next = 0.0;
    for d in (1..=k).rev() {
        let v = ((d * (n - d + 1)) as f64).sqrt();
        let m = (((d + 1) * (n - d)) as f64 / (d * (n - d + 1)) as f64).sqrt();
        renormalized_factors[d] = 1.0 / (-energy / v - m * next);
        next = renormalized_factors[d];
    }
    let prefix = |f: &[f64]| {
        f.iter()
            .scan(1.0, |acc, x| {
                *acc *= x;
                Some(*acc)
            })
            .collect::<Vec<f64>>()
    };
    Ok(GreenProfile {
        k,
        n,
        energy,
        green: prefix(&factors),
        renormalized: prefix(&renormalized_factors),
        factors,
        renormalized_factors,
    })
}

/// Dense `(T_K − E)^{−1} δ_{σ₀}` on the ball around the origin, reduced to
/// one value per distance (the column is radial).
fn dense_radial_column(k: usize, n: usize, energy: f64) -> Result<Vec<f64>> {
    let spec = OperatorSpec::ball(1.0, None, n, 0, k);
    let (mut mat, support) = spec.compile()?.dense_on_support()?;
    for i in 0..support.len() {
        mat[(i, i)] -= energy;
    }
    let mut rhs = DVector::zeros(support.len());
    let c = support.iter().position(|&i| i == 0).unwrap();
    rhs[c] = 1.0;
    let x = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| QremError::EnergyInSpectrum { energy, detail: "singular ball resolvent".into() })?;
    let mut out = vec![0.0; k + 1];
    for (r, &idx) in support.iter().enumerate() {
        let d = hamming_distance(idx as u32, 0);
        if (idx as u32) == (1u32 << d) - 1 {
            out[d] = x[r];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryRow {
    pub d: usize,
    pub at_e: f64,
    pub at_minus_e: f64,
    /// `|G(E) − (−1)^{d+1} G(−E)|`.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub rows: Vec<SymmetryRow>,
    pub max_deviation: f64,
}

/// `G(σ,σ₀;E) = (−1)^{d+1} G(σ,σ₀;−E)`, checked with dense solves at both
/// energies.
pub fn green_symmetry_check(profile: &GreenProfile) -> Result<SymmetryReport> {
    if profile.n > 12 {
        return Err(QremError::SizeCap { what: "dense Green oracle N", value: profile.n, cap: 12 });
    }
    let plus = dense_radial_column(profile.k, profile.n, profile.energy)?;
    let minus = dense_radial_column(profile.k, profile.n, -profile.energy)?;
    let rows: Vec<SymmetryRow> = (0..=profile.k)
        .map(|d| {
            let sign = if d % 2 == 0 { -1.0 } else { 1.0 };
            SymmetryRow {
                d,
                at_e: plus[d],
                at_minus_e: minus[d],
                deviation: (plus[d] - sign * minus[d]).abs(),
            }
        })
        .collect();
    let max_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    Ok(SymmetryReport { rows, max_deviation })
}

/// Dense resolvent column, one value per distance; oracle for CLI output.
pub fn dense_green_column(k: usize, n: usize, energy: f64) -> Result<Vec<f64>> {
    if n > 12 {
        return Err(QremError::SizeCap { what: "dense Green oracle N", value: n, cap: 12 });
    }
    dense_radial_column(k, n, energy)
}

/// `|E+N|^{−1} (N/|E|)^d C(N,d)^{−1}`, valid on the whole cube for `E < −N`.
pub fn full_cube_green_bound(n: usize, energy: f64, d: usize) -> f64 {
    let nf = n as f64;
    (nf / energy.abs()).powi(d as i32) / ((energy + nf).abs() * binomial_f64(n, d))
}

/// The root `ϱ₀ ∈ (0, ϱ)` of `2√(ϱ(1−ϱ)) = 3√(ϱ₀(1−ϱ₀))`.
pub fn rho_zero(rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(QremError::InvalidArgument(format!("need 0 < ϱ < 1/2, got {rho}")));
    }
    let target = 2.0 * (rho * (1.0 - rho)).sqrt() / 3.0;
    let (mut lo, mut hi) = (0.0, rho);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (mid * (1.0 - mid)).sqrt() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayRegime {
    FixedK,
    GrowingBall { rho: f64, epsilon: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub d: usize,
    pub green: f64,
    pub bound: f64,
    /// `bound / green`; at least one when the envelope holds.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub regime: DecayRegime,
    pub rows: Vec<DecayRow>,
    /// Fixed K: smallest `C` making the envelope hold at every `d`.
    pub fitted_constant: Option<f64>,
    pub rho_zero: Option<f64>,
    /// Growing ball: indices where `Γ̂(d) ≤ 1` (for `d ≥ ϱ₀N`) or `≤ 1/2` fails.
    pub factor_violations: Vec<usize>,
    pub holds: bool,
}

pub fn decay_bound_check(profile: &GreenProfile, regime: DecayRegime) -> Result<DecayReport> {
    let n = profile.n;
    let nf = n as f64;
    let e = profile.energy;
    match regime {
        DecayRegime::FixedK => {
            let gap = (e + t_ball_norm(profile.k, n)?).abs();
            let shape: Vec<f64> = (0..=profile.k)
                .map(|d| (nf.sqrt() / e.abs()).powi(d as i32) / (gap * binomial_f64(n, d).sqrt()))
                .collect();
            let c = profile
                .green
                .iter()
                .zip(&shape)
                .map(|(g, s)| g / s)
                .fold(0.0, f64::max);
            let rows = profile
                .green
                .iter()
                .zip(&shape)
                .enumerate()
                .map(|(d, (&g, &s))| DecayRow { d, green: g, bound: c * s, slack: c * s / g })
                .collect();
            Ok(DecayReport {
                regime,
                rows,
                fitted_constant: Some(c),
                rho_zero: None,
                factor_violations: Vec::new(),
                holds: true,
            })
        }
        DecayRegime::GrowingBall { rho, epsilon } => {
            let r0 = rho_zero(rho)?;
            let cut = r0 * nf;
            let factor_violations: Vec<usize> = (1..=profile.k)
                .filter(|&d| {
                    let lim = if d as f64 >= cut { 1.0 } else { 0.5 };
                    profile.renormalized_factors[d] > lim
                })
                .collect();
            let rows: Vec<DecayRow> = profile
                .green
                .iter()
                .enumerate()
                .map(|(d, &g)| {
                    let bound = 2f64.powf(-(d as f64).min(cut)) / (epsilon * nf * binomial_f64(n, d).sqrt());
                    DecayRow { d, green: g, bound, slack: bound / g }
                })
                .collect();
            let holds = factor_violations.is_empty() && rows.iter().all(|r| r.slack >= 1.0);
            Ok(DecayReport {
                regime,
                rows,
                fitted_constant: None,
                rho_zero: Some(r0),
                factor_violations,
                holds,
            })
        }
    }
}

/// The ball operator `H′` with the center potential removed, prepared for
/// repeated resolvent solves below its spectrum.
pub struct RankOne {
    pub center: Configuration,
    pub radius: usize,
    pub u_center: f64,
    op: CompiledOperator,
    /// `inf spec H′`.
    pub floor: f64,
}

struct ShiftedPd<'a> {
    op: &'a CompiledOperator,
    z: f64,
}

impl LinearOperator for ShiftedPd<'_> {
    fn len(&self) -> usize {
        self.op.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_into(x, y);
        for (i, (yv, xv)) in y.iter_mut().zip(x).enumerate() {
            if self.op.in_domain(i) {
                *yv -= self.z * xv;
            }
        }
    }

    fn in_domain(&self, i: usize) -> bool {
        self.op.in_domain(i)
    }
}

impl RankOne {
    pub fn new(u: &DisorderField, gamma: f64, center: Configuration, radius: usize) -> Result<Self> {
        if center.n != u.n {
            return Err(QremError::DimensionMismatch { expected: u.n, got: center.n });
        }
        let op = OperatorSpec::ball(gamma, Some(u), u.n, center.bits, radius)
            .zero_center()
            .compile()?;
        let floor = if gamma == 0.0 {
            op.support().iter().map(|&i| op.diagonal()[i]).fold(f64::INFINITY, f64::min)
        } else {
            let opts = LanczosOptions::lowest(1).tol(1e-10).maxiter(800).seed(u.seed);
            lanczos(&op, &opts, None).values[0]
        };
        Ok(Self { center, radius, u_center: u.at(center), op, floor })
    }

    /// `(H′ − z)^{−1} δ_σ`.
    pub fn resolvent_column(&self, z: f64) -> Result<Vec<f64>> {
        if z >= self.floor {
            return Err(QremError::EnergyInSpectrum {
                energy: z,
                detail: format!("need z below inf spec H′ = {}", self.floor),
            });
        }
        let mut rhs = vec![0.0; self.op.len()];
        rhs[self.center.index()] = 1.0;
        let shifted = ShiftedPd { op: &self.op, z };
        let cg = conjugate_gradient(&shifted, &rhs, 1e-12, 20 * self.op.len());
        Ok(cg.x)
    }

    /// `Σ(σ,z) = −⟨δ_σ|(H′ − z)^{−1} δ_σ⟩^{−1}`.
    pub fn sigma(&self, z: f64) -> Result<f64> {
        let x = self.resolvent_column(z)?;
        Ok(-1.0 / x[self.center.index()])
    }
}

pub fn self_energy(u: &DisorderField, gamma: f64, center: Configuration, radius: usize, z: f64) -> Result<f64> {
    RankOne::new(u, gamma, center, radius)?.sigma(z)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallGroundState {
    pub center: Configuration,
    pub radius: usize,
    pub energy: f64,
    /// Mean of `ψ` over each sphere `S_d(center)`, `d = 0..=radius`.
    pub amplitude_profile: Vec<f64>,
    #[serde(skip)]
    pub vector: Option<StateVector>,
    pub self_energy_at_e: f64,
    /// Lowest Lanczos eigenvalue of the full ball operator.
    pub lanczos_energy: f64,
    /// Conditions (a), (b) of the local deep hole with `ε = β_c/2` failed.
    pub deep_hole_warning: bool,
}

/// Rank-one ground state of `ΓT + U` on `B_{⌊αN⌋}(center)`: bisection on
/// `U(σ) − Σ(σ,E) = 0` below `inf spec H′`, eigenvector from the free
/// resolvent column.
pub fn ball_ground_state(u: &DisorderField, gamma: f64, center: Configuration, alpha: f64) -> Result<BallGroundState> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(QremError::InvalidArgument(format!("need 0 < α < 1/2, got {alpha}")));
    }
    let n = u.n;
    let radius = (alpha * n as f64).floor() as usize;
    let report = crate::geometry::check_deep_hole(
        u,
        beta_c() / 2.0,
        0.1,
        alpha,
        crate::geometry::DeepHoleScope::Local { center: center.bits },
    )?;
    let len = u.len();
    let u0 = u.at(center);
    if gamma == 0.0 {
        let mut v = vec![0.0; len];
        v[center.index()] = 1.0;
        let mut profile = vec![0.0; radius + 1];
        profile[0] = 1.0;
        return Ok(BallGroundState {
            center,
            radius,
            energy: u0,
            amplitude_profile: profile,
            vector: Some(StateVector { amplitudes: v, n }),
            self_energy_at_e: u0,
            lanczos_energy: u0,
            deep_hole_warning: !report.holds,
        });
    }
    let r1 = RankOne::new(u, gamma, center, radius)?;
    let hi = r1.floor - 1e-6;
    if u0 >= r1.floor {
        return Err(QremError::Bracket(format!(
            "U(center) = {u0} is not below inf spec H′ = {}",
            r1.floor
        )));
    }
    // Every eigenvalue of the ball operator lies above min U − Γ‖T_K‖.
    let min_u = r1.op.support().iter().map(|&i| u.values[i]).fold(u0, f64::min);
    let mut lo = min_u - gamma * t_ball_norm(radius, n)? - 1.0;
    let f = |z: f64| -> Result<f64> { Ok(u0 - r1.sigma(z)?) };
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(QremError::Bracket(format!(
            "no sign change of U − Σ on [{lo}, {hi}]: values {flo}, {fhi}"
        )));
    }
    let mut hi_b = hi;
    while hi_b - lo > 1e-10 * lo.abs().max(1.0) {
        let mid = 0.5 * (lo + hi_b);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi_b = mid;
        }
    }
    let energy = 0.5 * (lo + hi_b);
    let mut psi = r1.resolvent_column(energy)?;
    let nrm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|x| *x /= nrm);
    let mut sums = vec![0.0; radius + 1];
    for (i, &x) in psi.iter().enumerate() {
        let d = hamming_distance(i as u32, center.bits);
        if d <= radius {
            sums[d] += x;
        }
    }
    let amplitude_profile = sums
        .iter()
        .enumerate()
        .map(|(d, s)| s / binomial_f64(n, d))
        .collect();
    let ball = OperatorSpec::ball(gamma, Some(u), n, center.bits, radius).compile()?;
    let opts = LanczosOptions::lowest(1).tol(1e-10).maxiter(800).seed(u.seed);
    let lanczos_energy = lanczos(&ball, &opts, None).values[0];
    Ok(BallGroundState {
        center,
        radius,
        energy,
        amplitude_profile,
        vector: Some(StateVector { amplitudes: psi, n }),
        self_energy_at_e: r1.sigma(energy)?,
        lanczos_energy,
        deep_hole_warning: !report.holds,
    })
}
