//! Extremal and full spectra, level-cluster counting, gap sweeps, projected
//! potential norms, Schur-complement residuals and the finite-rank projection
//! lemma.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{QremError, Result};
use crate::hypercube::{fwht_in_place, StateVector};
use crate::krylov::{conjugate_gradient, lanczos, LanczosOptions, Negated};
use crate::operators::{CompiledOperator, LinearOperator, OperatorSpec, ProjectionSpec, Side};
use crate::predictions::critical_field;
use crate::rng::{aux_rng, STREAM_LANCZOS};

/// Dense solves are capped at this many unknowns.
pub const DENSE_MAX_DIM: usize = 1 << 13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solver {
    Lanczos {
        k: usize,
        tol: f64,
        maxiter: usize,
        seed: u64,
    },
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Option<Vec<StateVector>>,
    pub residuals: Vec<f64>,
    pub solver: Solver,
    pub converged: Vec<bool>,
    pub iterations: usize,
}

impl SpectralResult {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn ground(&self) -> f64 {
        self.eigenvalues[0]
    }
}

pub fn lanczos_extremal(spec: &OperatorSpec, opts: &LanczosOptions) -> Result<SpectralResult> {
    let op = spec.compile()?;
    Ok(lanczos_on(&op, spec.n, opts))
}

pub fn lanczos_on<O: LinearOperator + ?Sized>(op: &O, n: usize, opts: &LanczosOptions) -> SpectralResult {
    let out = lanczos(op, opts, None);
    let eigenvectors = opts.want_vectors.then(|| {
        out.vectors
            .into_iter()
            .map(|amplitudes| StateVector { amplitudes, n })
            .collect()
    });
    SpectralResult {
        eigenvalues: out.values,
        eigenvectors,
        residuals: out.residuals,
        solver: Solver::Lanczos {
            k: opts.k,
            tol: opts.tol,
            maxiter: opts.maxiter,
            seed: opts.seed,
        },
        converged: out.converged,
        iterations: out.iterations,
    }
}

/// All eigenvalues (and optionally eigenvectors) of the operator on its
/// domain, via a dense symmetric solver.
pub fn dense_spectrum(spec: &OperatorSpec, want_vectors: bool) -> Result<SpectralResult> {
    let op = spec.compile()?;
    dense_on(&op, want_vectors)
}

pub fn dense_on(op: &CompiledOperator, want_vectors: bool) -> Result<SpectralResult> {
    let support = op.support();
    if support.len() > DENSE_MAX_DIM {
        return Err(QremError::SizeCap {
            what: "dense dimension",
            value: support.len(),
            cap: DENSE_MAX_DIM,
        });
    }
    let (mat, support) = op.dense_on_support()?;
    if !want_vectors {
        let mut eigenvalues: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let k = eigenvalues.len();
        return Ok(SpectralResult {
            eigenvalues,
            eigenvectors: None,
            residuals: Vec::new(),
            solver: Solver::Dense,
            converged: vec![true; k],
            iterations: 0,
        });
    }
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..support.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let len = op.len();
    let mut vectors = Vec::with_capacity(order.len());
    let mut residuals = Vec::with_capacity(order.len());
    let mut y = vec![0.0; len];
    for &c in &order {
        let mut v = vec![0.0; len];
        for (r, &idx) in support.iter().enumerate() {
            v[idx] = eig.eigenvectors[(r, c)];
        }
        op.apply_into(&v, &mut y);
        let lam = eig.eigenvalues[c];
        residuals.push(y.iter().zip(&v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt());
        vectors.push(StateVector { amplitudes: v, n: op.n });
    }
    let k = order.len();
    Ok(SpectralResult {
        eigenvalues: order.iter().map(|&c| eig.eigenvalues[c]).collect(),
        eigenvectors: Some(vectors),
        residuals,
        solver: Solver::Dense,
        converged: vec![true; k],
        iterations: 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterCounts {
    pub counts: Vec<usize>,
    /// Eigenvalues below `max center + radius` that fall in no window.
    pub uncaptured: Vec<f64>,
}

pub fn count_level_clusters(eigs: &[f64], centers: &[f64], radius: f64) -> Result<ClusterCounts> {
    for w in centers.windows(2) {
        if w[1] <= w[0] {
            return Err(QremError::InvalidArgument("centers must be strictly increasing".into()));
        }
        if w[1] - w[0] <= 2.0 * radius {
            return Err(QremError::InvalidArgument(format!(
                "windows of radius {radius} around {} and {} overlap",
                w[0], w[1]
            )));
        }
    }
    let mut counts = vec![0; centers.len()];
    let mut uncaptured = Vec::new();
    let top = centers.last().map(|c| c + radius).unwrap_or(f64::NEG_INFINITY);
    for &e in eigs {
        match centers.iter().position(|c| (e - c).abs() <= radius) {
            Some(i) => counts[i] += 1,
            None if e < top => uncaptured.push(e),
            None => {}
        }
    }
    Ok(ClusterCounts { counts, uncaptured })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    Dense,
    Lanczos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub gamma: f64,
    pub gap: f64,
    pub ground: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSweepResult {
    pub gamma_grid: Vec<f64>,
    pub gaps: Vec<f64>,
    pub flags: Vec<bool>,
    pub min_gap: f64,
    pub argmin_gamma: f64,
    pub predicted_gamma: f64,
    pub refinement_trace: Vec<GapPoint>,
}

pub fn gap_at(u: &DisorderField, gamma: f64, method: GapMethod, seed: u64) -> Result<GapPoint> {
    if gamma == 0.0 {
        let mut v = u.values.clone();
        v.sort_by(f64::total_cmp);
        return Ok(GapPoint {
            gamma,
            gap: v[1] - v[0],
            ground: v[0],
            converged: true,
        });
    }
    let spec = OperatorSpec::full(gamma, u);
    let res = match method {
        GapMethod::Dense => dense_spectrum(&spec, false)?,
        GapMethod::Lanczos => {
            let opts = LanczosOptions::lowest(2).tol(1e-10).maxiter(1500).seed(seed);
            lanczos_extremal(&spec, &opts)?
        }
    };
    Ok(GapPoint {
        gamma,
        gap: res.eigenvalues[1] - res.eigenvalues[0],
        ground: res.eigenvalues[0],
        converged: res.all_converged(),
    })
}

/// `Δ_N(Γ) = E₁ − E₀` on a coarse grid over `[lo, hi]`, then golden-section
/// refinement inside the bracket around the coarse minimum.
pub fn gap_sweep(
    u: &DisorderField,
    gamma_range: (f64, f64),
    coarse_points: usize,
    refine_tol: f64,
    method: GapMethod,
    seed: u64,
) -> Result<GapSweepResult> {
    let (lo, hi) = gamma_range;
    let cap = 3.0 * crate::predictions::beta_c();
    if !(0.0 <= lo && lo < hi && hi <= cap + 1e-12) || coarse_points < 3 {
        return Err(QremError::InvalidArgument(format!(
            "gap sweep needs 0 <= lo < hi <= 3β_c and >= 3 points, got [{lo}, {hi}] with {coarse_points}"
        )));
    }
    let grid: Vec<f64> = (0..coarse_points)
        .map(|i| lo + (hi - lo) * i as f64 / (coarse_points - 1) as f64)
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    for &g in &grid {
        points.push(gap_at(u, g, method, seed)?);
    }
    let imin = (0..points.len())
        .min_by(|&a, &b| points[a].gap.total_cmp(&points[b].gap))
        .unwrap();
    let mut a = grid[imin.saturating_sub(1)];
    let mut b = grid[(imin + 1).min(grid.len() - 1)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut trace = Vec::new();
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut pc = gap_at(u, c, method, seed)?;
    let mut pd = gap_at(u, d, method, seed)?;
    trace.push(pc.clone());
    trace.push(pd.clone());
    while b - a > refine_tol {
        if pc.gap < pd.gap {
            b = d;
            d = c;
            pd = pc;
            c = b - phi * (b - a);
            pc = gap_at(u, c, method, seed)?;
            trace.push(pc.clone());
        } else {
            a = c;
            c = d;
            pc = pd;
            d = a + phi * (b - a);
            pd = gap_at(u, d, method, seed)?;
            trace.push(pd.clone());
        }
    }
    let best = points
        .iter()
        .chain(trace.iter())
        .min_by(|x, y| x.gap.total_cmp(&y.gap))
        .unwrap()
        .clone();
    Ok(GapSweepResult {
        gaps: points.iter().map(|p| p.gap).collect(),
        flags: points.iter().map(|p| p.converged).collect(),
        gamma_grid: grid,
        min_gap: best.gap,
        argmin_gamma: best.gamma,
        predicted_gamma: critical_field(u.n, u.min()),
        refinement_trace: trace,
    })
}

/// `v ↦ P_ε M P_ε v` for a diagonal multiplier `M`.
struct ProjectedDiagonal {
    n: usize,
    proj: ProjectionSpec,
    mult: Vec<f64>,
}

impl LinearOperator for ProjectedDiagonal {
    fn len(&self) -> usize {
        1 << self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.proj.project_in_place(self.n, y);
        for (v, m) in y.iter_mut().zip(&self.mult) {
            *v *= m;
        }
        self.proj.project_in_place(self.n, y);
    }
}

/// Largest `|λ|` of a symmetric operator via two extremal Lanczos runs.
fn symmetric_norm<O: LinearOperator>(op: &O, start: &[f64], seed: u64) -> f64 {
    let opts = LanczosOptions::lowest(1).tol(1e-9).maxiter(400).seed(seed);
    let low = lanczos(op, &opts, Some(start)).values[0];
    let high = -lanczos(&Negated(op), &opts, Some(start)).values[0];
    low.abs().max(high.abs())
}

/// `‖P_ε W^p P_ε‖`, or `‖P_ε (W² − w_N) P_ε‖` when `centered` (then `p` is
/// ignored).
pub fn projected_potential_norm(u: &DisorderField, eps: f64, p: u32, centered: bool) -> Result<f64> {
    if !centered && ![1, 2, 4].contains(&p) {
        return Err(QremError::InvalidArgument(format!("power must be 1, 2 or 4, got {p}")));
    }
    let proj = ProjectionSpec { epsilon: eps, side: Side::P };
    if proj.rank(u.n) == 0 {
        return Ok(0.0);
    }
    let w_n = u.variance_parameter();
    let mult = u
        .values
        .iter()
        .map(|&w| if centered { w * w - w_n } else { w.powi(p as i32) })
        .collect();
    let op = ProjectedDiagonal { n: u.n, proj, mult };
    let mut rng = aux_rng(u.seed, STREAM_LANCZOS);
    let mut start: Vec<f64> = (0..op.len()).map(|_| rand::Rng::sample(&mut rng, rand_distr::StandardNormal)).collect();
    proj.project_in_place(u.n, &mut start);
    Ok(symmetric_norm(&op, &start, u.seed))
}

/// `Q_ε H Q_ε − E` on the range of `Q_ε`.
struct QBlock<'a> {
    h: &'a CompiledOperator,
    proj: ProjectionSpec,
    energy: f64,
}

impl LinearOperator for QBlock<'_> {
    fn len(&self) -> usize {
        self.h.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut t = x.to_vec();
        self.proj.project_in_place(self.h.n, &mut t);
        self.h.apply_into(&t, y);
        for (yv, tv) in y.iter_mut().zip(&t) {
            *yv -= self.energy * tv;
        }
        self.proj.project_in_place(self.h.n, y);
    }
}

/// `‖P_ε W R_ε(E) W P_ε + P_ε w_N/E‖` with `R_ε(E) = (Q_ε H Q_ε − E)^{−1}` on
/// the range of `Q_ε`. The `P`-block is assembled densely in the parity
/// basis; each column of `R_ε(E) W P_ε` is one conjugate-gradient solve.
pub fn schur_residual(u: &DisorderField, gamma: f64, eps: f64, energy: f64) -> Result<f64> {
    let n = u.n;
    if n > 12 {
        return Err(QremError::SizeCap { what: "Schur residual N", value: n, cap: 12 });
    }
    let nf = n as f64;
    let q = ProjectionSpec { epsilon: eps, side: Side::Q };
    let p = ProjectionSpec { epsilon: eps, side: Side::P };
    // Largest |2k − N| among the Q modes bounds Q T Q from below.
    let t_q = (0..=n)
        .map(|k| (2.0 * k as f64 - nf).abs())
        .filter(|t| *t < eps * nf)
        .fold(0.0f64, f64::max);
    let floor = -u.sup_norm() - gamma * t_q;
    if energy >= floor {
        return Err(QremError::EnergyInSpectrum {
            energy,
            detail: format!("need E < −‖U‖∞ − Γ·max_Q|2k−N| = {floor}"),
        });
    }
    let w_n = u.variance_parameter();
    let h = OperatorSpec::full(gamma, u).compile()?;
    let block = QBlock { h: &h, proj: q, energy };
    let len = 1usize << n;
    let p_modes: Vec<usize> = (0..len).filter(|&a| p.keeps(n, a as u32)).collect();
    let m = p_modes.len();
    if m == 0 {
        return Ok(0.0);
    }
    // Columns W Φ_A for A in P, and the matching solves.
    let mut wcols = Vec::with_capacity(m);
    let mut solves = Vec::with_capacity(m);
    for &a in &p_modes {
        let mut phi = vec![0.0; len];
        phi[a] = 1.0;
        fwht_in_place(&mut phi);
        let mut wphi: Vec<f64> = phi.iter().zip(&u.values).map(|(x, w)| x * w).collect();
        wcols.push(wphi.clone());
        q.project_in_place(n, &mut wphi);
        let cg = conjugate_gradient(&block, &wphi, 1e-13, 4 * len);
        solves.push(cg.x);
    }
    // ⟨Φ_A|W R W|Φ_B⟩ = ⟨W Φ_A, R W Φ_B⟩; R returns vectors in range Q.
    let mut mat = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            mat[(i, j)] = crate::hypercube::dot(&wcols[i], &solves[j]);
        }
        mat[(i, i)] += w_n / energy;
    }
    let sym = (&mat + mat.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Spectral norm of a symmetric matrix.
fn sym_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// `(‖P − F‖, (m + 2√m)·max_j ‖P f_j − f_j‖)` for a rank-`m` projection `P`
/// and orthonormal `f_1..f_m` spanning `F`.
pub fn projection_lemma_check(p: &DMatrix<f64>, f_list: &[Vec<f64>]) -> Result<(f64, f64)> {
    let m = f_list.len();
    let rank = p.trace().round() as usize;
    if rank != m {
        return Err(QremError::InvalidArgument(format!(
            "projection rank {rank} differs from {m} vectors"
        )));
    }
    let dim = p.nrows();
    let mut f = DMatrix::zeros(dim, dim);
    let mut worst = 0.0f64;
    for v in f_list {
        if v.len() != dim {
            return Err(QremError::DimensionMismatch { expected: dim, got: v.len() });
        }
        let col = nalgebra::DVector::from_column_slice(v);
        f += &col * col.transpose();
        worst = worst.max((p * &col - &col).norm());
    }
    let mf = m as f64;
    Ok((sym_norm(&(p - f)), (mf + 2.0 * mf.sqrt()) * worst))
}
