//! Pressures `Φ_N = ln(2^{−N} Tr e^{−βH})`, thermal averages, and the
//! order-one free-energy corrections.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::disorder::{sample_rem, DisorderField};
use crate::eigensolve::{dense_spectrum, lanczos_extremal};
use crate::error::{QremError, Result};
use crate::hypercube::{binomial_f64, sphere, Configuration};
use crate::krylov::{gauss_rule, LanczosOptions};
use crate::operators::{CompiledOperator, LinearOperator, OperatorSpec};
use crate::predictions::{free_energy_correction, ln_cosh, ln_ruelle_prefactor, phase_point, Regime};
use crate::rng::{aux_rng, STREAM_TRACE};

const LN2: f64 = std::f64::consts::LN_2;

/// `ln Σ e^{x_i}` with a max shift.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln(2^{−N} Σ_σ e^{−βU(σ)})`, streaming with a running max shift.
pub fn classical_pressure(u: &DisorderField, beta: f64) -> f64 {
    let (mut m, mut s) = (f64::NEG_INFINITY, 0.0);
    for &v in &u.values {
        let x = -beta * v;
        if x > m {
            s = s * (m - x).exp() + 1.0;
            m = x;
        } else {
            s += (x - m).exp();
        }
    }
    m + s.ln() - u.n as f64 * LN2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PressureMethod {
    DenseTrace,
    /// `Γ = 0` only.
    ClassicalExact,
    LowEnergyTruncated { k: usize },
    /// `Σ_σ ⟨δ_σ|e^{−βH}|δ_σ⟩`, each term by Gauss-Lanczos quadrature;
    /// exhaustive when `samples ≥ 2^N`, importance-sampled otherwise.
    DiagonalQuadrature { samples: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureRecord {
    pub n: usize,
    pub beta: f64,
    pub gamma: f64,
    pub log_z: f64,
    pub method: PressureMethod,
    pub seed: u64,
    /// Upper bound on `Φ_true − log_z` for truncated traces.
    pub remainder_bound: Option<f64>,
    /// Standard error of `log_z` for sampled traces.
    pub stderr: Option<f64>,
    pub flagged: bool,
}

/// Relative truncation tolerance of the low-energy trace.
pub const TRUNCATION_TOL: f64 = 1e-12;

pub fn quantum_pressure(u: &DisorderField, beta: f64, gamma: f64, method: PressureMethod) -> Result<PressureRecord> {
    let n = u.n;
    let nf = n as f64;
    let mut rec = PressureRecord {
        n,
        beta,
        gamma,
        log_z: 0.0,
        method,
        seed: u.seed,
        remainder_bound: None,
        stderr: None,
        flagged: false,
    };
    if beta == 0.0 {
        return Ok(rec);
    }
    match method {
        PressureMethod::ClassicalExact => {
            if gamma != 0.0 {
                return Err(QremError::InvalidArgument("classical-exact needs Γ = 0".into()));
            }
            rec.log_z = classical_pressure(u, beta);
        }
        PressureMethod::DenseTrace => {
            let spec = OperatorSpec::full(gamma, u);
            let eigs = dense_spectrum(&spec, false)?.eigenvalues;
            rec.log_z = log_sum_exp(eigs.iter().map(|e| -beta * e)) - nf * LN2;
        }
        PressureMethod::LowEnergyTruncated { k } => {
            if k == 0 {
                return Err(QremError::InvalidArgument("truncated trace needs k >= 1".into()));
            }
            let spec = OperatorSpec::full(gamma, u);
            let opts = LanczosOptions::lowest(k).tol(1e-9).maxiter(3 * k + 400).seed(u.seed);
            let res = lanczos_extremal(&spec, &opts)?;
            let eigs = &res.eigenvalues;
            let partial = log_sum_exp(eigs.iter().map(|e| -beta * e));
            let rest = (u.len() - eigs.len()) as f64;
            // Remaining levels sit at or above the last computed one.
            let rel = (rest.ln() - beta * eigs[eigs.len() - 1] - partial).exp();
            rec.log_z = partial - nf * LN2;
            rec.remainder_bound = Some(rel.ln_1p());
            rec.flagged = rel > TRUNCATION_TOL || !res.all_converged();
        }
        PressureMethod::DiagonalQuadrature { samples } => {
            let (lz, se) = quadrature_pressure(u, beta, gamma, samples)?;
            rec.log_z = lz;
            rec.stderr = Some(se);
        }
    }
    Ok(rec)
}

fn ln_diagonal(op: &CompiledOperator, bits: u32, beta: f64) -> f64 {
    let mut start = vec![0.0; op.len()];
    start[bits as usize] = 1.0;
    gauss_rule(op, &start, &[beta], 1e-11, 300).ln_laplace(beta)
}

/// Proposal mixing over distances from a classical Gibbs draw.
const MIX: [f64; 3] = [0.95, 0.04, 0.01];

fn quadrature_pressure(u: &DisorderField, beta: f64, gamma: f64, samples: usize) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(QremError::InvalidArgument("quadrature needs samples >= 1".into()));
    }
    let n = u.n;
    let nf = n as f64;
    let op = OperatorSpec::full(gamma, u).compile()?;
    let len = u.len();
    if samples >= len {
        let lz = log_sum_exp((0..len as u32).map(|b| ln_diagonal(&op, b, beta)));
        return Ok((lz - nf * LN2, 0.0));
    }
    let mut rng = aux_rng(u.seed, STREAM_TRACE);
    // ln of D(σ)/q(σ) up to the common constant, per sample.
    let mut logs = Vec::with_capacity(samples);
    if phase_point(beta, gamma).regime == Regime::QuantumParamagnet {
        for _ in 0..samples {
            let b = rng.random_range(0..len as u32);
            logs.push(ln_diagonal(&op, b, beta));
        }
        // Uniform proposal: 2^{−N} Σ D = mean D.
        let (lm, se) = log_mean_with_se(&logs);
        return Ok((lm, se));
    }
    let lw: Vec<f64> = u.values.iter().map(|v| -beta * v).collect();
    let ln_w = log_sum_exp(lw.iter().copied());
    let mut cdf = Vec::with_capacity(len);
    let mut acc = 0.0;
    for x in &lw {
        acc += (x - ln_w).exp();
        cdf.push(acc);
    }
    let dmax = n.min(MIX.len() - 1);
    let mix_total: f64 = MIX[..=dmax].iter().sum();
    for _ in 0..samples {
        let r: f64 = rng.random::<f64>() * acc;
        let tau = cdf.partition_point(|&c| c < r).min(len - 1) as u32;
        let pick: f64 = rng.random::<f64>() * mix_total;
        let mut d = 0;
        let mut c = MIX[0];
        while pick > c && d < dmax {
            d += 1;
            c += MIX[d];
        }
        let mut sigma = tau;
        let mut flips: Vec<usize> = (0..n).collect();
        for i in 0..d {
            let j = rng.random_range(i..n);
            flips.swap(i, j);
            sigma ^= 1 << flips[i];
        }
        // ln q̃(σ) = ln Σ_d c_d Σ_{τ∈S_d(σ)} e^{−βU(τ)}/C(N,d)
        let center = Configuration { bits: sigma, n };
        let mut terms = Vec::new();
        for (dd, &cd) in MIX[..=dmax].iter().enumerate() {
            let w = (cd / mix_total).ln() - binomial_f64(n, dd).ln();
            for t in sphere(center, dd)? {
                terms.push(w + lw[t.index()]);
            }
        }
        let ln_q = log_sum_exp(terms) - ln_w;
        logs.push(ln_diagonal(&op, sigma, beta) - ln_q);
    }
    // 2^{−N} Σ D = 2^{−N} E_q[D/q].
    let (lm, se) = log_mean_with_se(&logs);
    Ok((lm - nf * LN2, se))
}

/// `ln mean e^{x_i}` and its delta-method standard error.
fn log_mean_with_se(xs: &[f64]) -> (f64, f64) {
    let s = xs.len() as f64;
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let mean = r.iter().sum::<f64>() / s;
    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1.0).max(1.0);
    (m + mean.ln(), (var / s).sqrt() / mean)
}

/// `⟨T⟩^pm_β = −N tanh β`.
pub fn paramagnet_t_average(n: usize, beta: f64) -> f64 {
    -(n as f64) * beta.tanh()
}

/// `⟨T⟩_β` by a dense trace over the spectrum of `T`.
pub fn dense_t_average(n: usize, beta: f64) -> Result<f64> {
    let eigs = dense_spectrum(&OperatorSpec::pure_t(n, 1.0), false)?.eigenvalues;
    Ok(gibbs_mean(&eigs, beta))
}

/// `Σ_i x_i e^{−βx_i} / Σ_i e^{−βx_i}`.
pub fn gibbs_mean(levels: &[f64], beta: f64) -> f64 {
    let m = levels.iter().map(|x| -beta * x).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for &x in levels {
        let w = (-beta * x - m).exp();
        num += x * w;
        den += w;
    }
    num / den
}

/// Gibbs weight of the levels inside `[lo, hi]`.
pub fn gibbs_window_mass(levels: &[f64], beta: f64, lo: f64, hi: f64) -> f64 {
    let m = levels.iter().map(|x| -beta * x).fold(f64::NEG_INFINITY, f64::max);
    let (mut inside, mut total) = (0.0, 0.0);
    for &x in levels {
        let w = (-beta * x - m).exp();
        total += w;
        if (lo..=hi).contains(&x) {
            inside += w;
        }
    }
    inside / total
}

/// `⟨U⟩^cl_β` by the exact weighted sum.
pub fn classical_u_average(u: &DisorderField, beta: f64) -> f64 {
    gibbs_mean(&u.values, beta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRow {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub prediction: f64,
    pub samples: Vec<f64>,
    pub flagged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSeries {
    pub beta: f64,
    pub gamma: f64,
    pub regime: Regime,
    pub seeds: Vec<u64>,
    pub rows: Vec<CorrectionRow>,
}

/// Paramagnet: `Φ_N(β,Γ) − N ln cosh(βΓ)`; REM branches: `Φ_N(β,Γ) − Φ_N(β,0)`
/// on the same realization.
pub fn correction_sample(u: &DisorderField, beta: f64, gamma: f64, method: PressureMethod) -> Result<(f64, bool)> {
    let rec = quantum_pressure(u, beta, gamma, method)?;
    let regime = phase_point(beta, gamma).regime;
    let base = match regime {
        Regime::QuantumParamagnet => u.n as f64 * ln_cosh(beta * gamma),
        _ => classical_pressure(u, beta),
    };
    Ok((rec.log_z - base, rec.flagged))
}

pub fn correction_measurement(
    beta: f64,
    gamma: f64,
    n_list: &[usize],
    seeds: &[u64],
    method: PressureMethod,
) -> Result<CorrectionSeries> {
    let prediction = free_energy_correction(beta, gamma)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut samples = Vec::with_capacity(seeds.len());
        let mut flagged = 0;
        for &s in seeds {
            let u = sample_rem(n, s)?;
            let (x, f) = correction_sample(&u, beta, gamma, method)?;
            samples.push(x);
            flagged += f as usize;
        }
        let (mean, stderr) = mean_stderr(&samples);
        rows.push(CorrectionRow { n, mean, stderr, prediction, samples, flagged });
    }
    Ok(CorrectionSeries {
        beta,
        gamma,
        regime: phase_point(beta, gamma).regime,
        seeds: seeds.to_vec(),
        rows,
    })
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let s = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / s;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (s - 1.0).max(1.0);
    (mean, (var / s).sqrt())
}

/// `ln` of one sample of `prefactor(N,β,Γ)·Z_N(β,Γ)`, the frozen-phase
/// normalization of the partition function.
pub fn ln_ruelle_sample(u: &DisorderField, beta: f64, gamma: f64, method: PressureMethod) -> Result<f64> {
    if gamma >= crate::predictions::gamma_c(beta) {
        return Err(QremError::InvalidArgument(format!("need Γ < Γ_c(β), got Γ = {gamma}")));
    }
    let pre = ln_ruelle_prefactor(u.n, beta, gamma)?;
    Ok(pre + quantum_pressure(u, beta, gamma, method)?.log_z)
}

pub fn ruelle_fluctuation_sample(u: &DisorderField, beta: f64, gamma: f64, method: PressureMethod) -> Result<f64> {
    Ok(ln_ruelle_sample(u, beta, gamma, method)?.exp())
}
