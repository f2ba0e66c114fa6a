//! Eigenvector observables, delocalization verdicts, extreme-value
//! ensembles, σ₀-mismatch statistics and random-walk diagnostics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::disorder::{rescale, sample_rem, DisorderField};
use crate::eigensolve::lanczos_extremal;
use crate::error::{QremError, Result};
use crate::hypercube::{binary_entropy, binomial_f64, hamming_distance, StateVector};
use crate::krylov::LanczosOptions;
use crate::operators::OperatorSpec;
use crate::predictions::{beta_c, deloc_bound, gumbel_cdf};
use crate::rng::{aux_rng, STREAM_WALK};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvectorStats {
    pub l1: f64,
    pub l2: f64,
    pub l4: f64,
    pub linf: f64,
    /// `⟨Φ_∅, ψ⟩` with the sign of `ψ` fixed so that `ψ(σ*) > 0`.
    pub overlap_phi_empty: f64,
    pub phi_empty_distance: f64,
    /// `max_σ |ψ(σ)|`, attained at `argmax` (smallest bits on ties).
    pub overlap_delta: f64,
    pub argmax: u32,
    /// `Σ_{B_K(σ*)} |ψ|²` for `K = 0..=k_max`.
    pub ball_mass: Vec<f64>,
    pub xi_distance: f64,
    pub delta_distance: f64,
}

/// `ξ = √(1 − Γ²/(β_c²N)) δ_{σ*} + Γ/(β_c N) Σ_{S_1(σ*)} δ`.
pub fn first_order_vector(n: usize, gamma: f64, center: u32) -> Result<StateVector> {
    let nf = n as f64;
    let bc = beta_c();
    let a = 1.0 - gamma * gamma / (bc * bc * nf);
    if a < 0.0 {
        return Err(QremError::InvalidArgument(format!("Γ = {gamma} too large for ξ at N = {n}")));
    }
    let mut v = vec![0.0; 1 << n];
    v[center as usize] = a.sqrt();
    for j in 0..n {
        v[(center ^ (1 << j)) as usize] = gamma / (bc * nf);
    }
    StateVector::from_vec(n, v)
}

pub fn eigvec_stats(psi: &StateVector, gamma: f64, k_max: usize) -> Result<EigenvectorStats> {
    let n = psi.n;
    let a = &psi.amplitudes;
    let mut argmax = 0usize;
    for (i, x) in a.iter().enumerate() {
        if x.abs() > a[argmax].abs() {
            argmax = i;
        }
    }
    let sign = if a[argmax] < 0.0 { -1.0 } else { 1.0 };
    let l1 = a.iter().map(|x| x.abs()).sum::<f64>();
    let l2 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let l4 = a.iter().map(|x| x.powi(4)).sum::<f64>().powf(0.25);
    let linf = a[argmax].abs();
    let overlap = sign * a.iter().sum::<f64>() / (a.len() as f64).sqrt();
    let mut shell = vec![0.0; n + 1];
    for (i, x) in a.iter().enumerate() {
        shell[hamming_distance(i as u32, argmax as u32)] += x * x;
    }
    let ball_mass = shell
        .iter()
        .take(k_max.min(n) + 1)
        .scan(0.0, |acc, s| {
            *acc += s;
            Some(*acc)
        })
        .collect();
    let xi = first_order_vector(n, gamma, argmax as u32)
        .map(|xi| {
            xi.amplitudes
                .iter()
                .zip(a)
                .map(|(x, y)| (sign * y - x).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .unwrap_or(f64::NAN);
    let delta_distance = (l2 * l2 - linf * linf + (linf - 1.0).powi(2)).max(0.0).sqrt();
    Ok(EigenvectorStats {
        l1,
        l2,
        l4,
        linf,
        overlap_phi_empty: overlap,
        phi_empty_distance: (l2 * l2 + 1.0 - 2.0 * overlap).max(0.0).sqrt(),
        overlap_delta: linf,
        argmax: argmax as u32,
        ball_mass,
        xi_distance: xi,
        delta_distance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelocVerdict {
    pub energy: f64,
    pub v: f64,
    pub nu: f64,
    /// `‖ψ‖_∞²`.
    pub measured: f64,
    pub bound: f64,
    /// `bound / measured`.
    pub slack: f64,
    pub holds: bool,
}

/// `‖ψ‖_∞² ≤ 2^{−N} e^{Nγ((1+ν)/2)}`, `ν = E/N + v`.
pub fn delocalization_verdict(psi: &StateVector, energy: f64, v: f64, n: usize) -> Result<DelocVerdict> {
    let bound = deloc_bound(energy, v, n)?;
    let measured = psi.amplitudes.iter().fold(0.0f64, |m, x| m.max(x.abs())).powi(2);
    Ok(DelocVerdict {
        energy,
        v,
        nu: energy / n as f64 + v,
        measured,
        bound,
        slack: bound / measured,
        holds: measured <= bound * (1.0 + 1e-12),
    })
}

/// One-sample KS distance of `samples` to the continuous CDF `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

pub fn ks_gumbel(samples: &[f64]) -> f64 {
    ks_statistic(samples, gumbel_cdf)
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n: usize,
    pub gamma: f64,
    pub beta: Option<f64>,
    pub seed_count: usize,
    pub seeds: Vec<u64>,
    pub samples: Vec<f64>,
    pub ks_to_reference: f64,
    pub mismatch_rate: Option<f64>,
    /// Seeds whose solver did not converge; excluded from `samples`.
    pub failures: Vec<u64>,
}

/// Ground energy of `ΓT + U`: `min U` at `Γ = 0`, Lanczos otherwise.
pub fn ground_energy(u: &DisorderField, gamma: f64) -> Result<(f64, bool)> {
    if gamma == 0.0 {
        return Ok((u.min(), true));
    }
    let opts = LanczosOptions::lowest(1).tol(1e-8).maxiter(600).seed(u.seed);
    let r = lanczos_extremal(&OperatorSpec::full(gamma, u), &opts)?;
    Ok((r.eigenvalues[0], r.all_converged()))
}

/// Rescaled ground energies `x = s_N^{−1}(E₀; Γ)` and their KS distance to
/// `exp(−e^{−x})`.
pub fn extreme_ensemble(n: usize, gamma: f64, seeds: &[u64]) -> Result<EnsembleSummary> {
    if gamma >= beta_c() {
        return Err(QremError::InvalidArgument(format!("need Γ < β_c, got {gamma}")));
    }
    let mut samples = Vec::with_capacity(seeds.len());
    let mut failures = Vec::new();
    for &s in seeds {
        let u = sample_rem(n, s)?;
        let (e0, ok) = ground_energy(&u, gamma)?;
        if ok {
            samples.push(rescale(e0, n, gamma)?.x);
        } else {
            failures.push(s);
        }
    }
    Ok(EnsembleSummary {
        n,
        gamma,
        beta: None,
        seed_count: seeds.len(),
        seeds: seeds.to_vec(),
        ks_to_reference: ks_gumbel(&samples),
        samples,
        mismatch_rate: None,
        failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchRow {
    pub seed: u64,
    pub sigma0: u32,
    pub sigma_min: u32,
    /// Site minimizing the second-order rank-one energy among the deepest
    /// candidates.
    pub sigma_pred: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub n: usize,
    pub gamma: f64,
    pub rate: f64,
    /// Wilson 95% interval.
    pub interval: (f64, f64),
    pub min_u_hits: usize,
    pub predictor_hits: usize,
    pub rows: Vec<MismatchRow>,
}

/// `U(σ) + Γ²N/U(σ) + (Γ²/U(σ)²) Σ_{S_1(σ)} U`, the rank-one energy to second
/// order with `E_σ ≈ U(σ)` in the corrections.
pub fn second_order_energy(u: &DisorderField, gamma: f64, bits: u32) -> f64 {
    let u0 = u.values[bits as usize];
    let nf = u.n as f64;
    let z = u.neighbor_stats(u.config(bits)).z * nf;
    u0 + gamma * gamma * nf / u0 + gamma * gamma * z / (u0 * u0)
}

fn wilson(hits: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let n = total as f64;
    let p = hits as f64 / n;
    let den = 1.0 + z * z / n;
    let mid = (p + z * z / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / den;
    ((mid - half).max(0.0), (mid + half).min(1.0))
}

/// Candidates for the predictor: the deepest sites of `U`.
const CANDIDATES: usize = 16;

pub fn sigma0_mismatch(n: usize, gamma: f64, seeds: &[u64]) -> Result<MismatchReport> {
    if gamma >= beta_c() {
        return Err(QremError::InvalidArgument(format!("need Γ < β_c, got {gamma}")));
    }
    let mut rows = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let u = sample_rem(n, s)?;
        let (cmin, _) = u.argmin();
        let sigma0 = if gamma == 0.0 {
            cmin.bits
        } else {
            let opts = LanczosOptions::lowest(1).tol(1e-8).maxiter(600).seed(s).vectors();
            let r = lanczos_extremal(&OperatorSpec::full(gamma, &u), &opts)?;
            let v = &r.eigenvectors.as_ref().unwrap()[0].amplitudes;
            let mut best = 0usize;
            for (i, x) in v.iter().enumerate() {
                if x.abs() > v[best].abs() {
                    best = i;
                }
            }
            best as u32
        };
        let mut order: Vec<u32> = (0..u.len() as u32).collect();
        order.sort_by(|&a, &b| u.values[a as usize].total_cmp(&u.values[b as usize]).then(a.cmp(&b)));
        let sigma_pred = order
            .iter()
            .take(CANDIDATES)
            .copied()
            .min_by(|&a, &b| {
                second_order_energy(&u, gamma, a)
                    .total_cmp(&second_order_energy(&u, gamma, b))
                    .then(a.cmp(&b))
            })
            .unwrap();
        rows.push(MismatchRow { seed: s, sigma0, sigma_min: cmin.bits, sigma_pred });
    }
    let misses = rows.iter().filter(|r| r.sigma0 != r.sigma_min).count();
    Ok(MismatchReport {
        n,
        gamma,
        rate: misses as f64 / rows.len().max(1) as f64,
        interval: wilson(misses, rows.len()),
        min_u_hits: rows.len() - misses,
        predictor_hits: rows.iter().filter(|r| r.sigma0 == r.sigma_pred).count(),
        rows,
    })
}

/// Kahan-compensated accumulator.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Law of the distance `d(Z_steps, Z_0)` of the simple random walk, from the
/// radial birth-death chain.
pub fn rw_distance_law(n: usize, steps: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    for _ in 0..steps {
        let mut next = vec![Kahan::default(); n + 1];
        for (r, &w) in p.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            if r < n {
                next[r + 1].add(w * (n - r) as f64 / nf);
            }
            if r > 0 {
                next[r - 1].add(w * r as f64 / nf);
            }
        }
        p = next.iter().map(|k| k.sum).collect();
    }
    p
}

/// `p_steps(σ,σ₀)` for one configuration at distance `d`.
pub fn rw_transition(n: usize, steps: usize, d: usize) -> Result<f64> {
    if d > n {
        return Err(QremError::InvalidArgument(format!("distance {d} exceeds N = {n}")));
    }
    Ok(rw_distance_law(n, steps)[d] / binomial_f64(n, d))
}

/// `max{e^{−γ(α/8)N}, e^{−αN/8}}` without the `o(N)` correction.
pub fn rw_envelope(n: usize, alpha: f64) -> Result<f64> {
    let nf = n as f64;
    Ok((-binary_entropy(alpha / 8.0)? * nf).exp().max((-alpha * nf / 8.0).exp()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SojournEstimate {
    pub probability: f64,
    pub hits: usize,
    pub trials: usize,
    /// `exp(−tN ln(tN/(α|W|e)))`.
    pub bound: f64,
    pub steps: usize,
    pub w: Vec<u32>,
}

/// Monte Carlo estimate of `P(M_{αN}(W) ≥ tN)` for a walk from the origin,
/// with `W` planted on the closest spheres around the origin (the origin
/// excluded).
pub fn rw_sojourn(n: usize, w_size: usize, alpha: f64, t: f64, trials: usize, seed: u64) -> Result<SojournEstimate> {
    crate::hypercube::check_dimension(n)?;
    if !(alpha > 0.0) || !(t > 0.0) {
        return Err(QremError::InvalidArgument(format!("need α, t > 0, got α = {alpha}, t = {t}")));
    }
    let nf = n as f64;
    let steps = (alpha * nf).floor() as usize;
    let bound = if w_size == 0 {
        0.0
    } else {
        (-t * nf * (t * nf / (alpha * w_size as f64 * std::f64::consts::E)).ln()).exp()
    };
    let origin = crate::hypercube::Configuration { bits: 0, n };
    let w: Vec<u32> = (1..=n)
        .flat_map(|r| crate::hypercube::sphere(origin, r).into_iter().flatten())
        .map(|c| c.bits)
        .take(w_size)
        .collect();
    if w.len() < w_size {
        return Err(QremError::InvalidArgument(format!("|W| = {w_size} exceeds the cube")));
    }
    let mut est = SojournEstimate { probability: 0.0, hits: 0, trials, bound, steps, w };
    if w_size == 0 || t > alpha {
        return Ok(est);
    }
    let inside: std::collections::HashSet<u32> = est.w.iter().copied().collect();
    let need = t * nf;
    let mut rng = aux_rng(seed, STREAM_WALK);
    for _ in 0..trials {
        let mut z = 0u32;
        let mut visits = inside.contains(&z) as usize;
        for _ in 0..steps {
            z ^= 1 << rng.random_range(0..n);
            visits += inside.contains(&z) as usize;
        }
        if visits as f64 >= need {
            est.hits += 1;
        }
    }
    est.probability = est.hits as f64 / trials.max(1) as f64;
    Ok(est)
}
