//! Krylov building blocks: Lanczos with full reorthogonalization, Gauss
//! quadrature of spectral measures, and conjugate gradients.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::hypercube::dot;
use crate::operators::LinearOperator;
use crate::rng::{aux_rng, STREAM_LANCZOS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    pub k: usize,
    pub tol: f64,
    pub maxiter: usize,
    pub seed: u64,
    pub want_vectors: bool,
}

impl LanczosOptions {
    pub fn lowest(k: usize) -> Self {
        Self {
            k,
            tol: 1e-9,
            maxiter: 600,
            seed: 0,
            want_vectors: false,
        }
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn maxiter(mut self, maxiter: usize) -> Self {
        self.maxiter = maxiter;
        self
    }

    pub fn vectors(mut self) -> Self {
        self.want_vectors = true;
        self
    }
}

#[derive(Clone, Debug)]
pub struct LanczosOutcome {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: usize,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Classical Gram-Schmidt against `basis`, repeated once when the pass
/// cancelled most of the vector (Kahan-Parlett criterion).
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        let before = norm(w);
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
        if norm(w) > 0.7 * before {
            break;
        }
    }
}

fn random_domain_vector<O: LinearOperator + ?Sized>(op: &O, rng: &mut impl Rng) -> Vec<f64> {
    (0..op.len())
        .map(|i| {
            let g: f64 = rng.sample(StandardNormal);
            if op.in_domain(i) {
                g
            } else {
                0.0
            }
        })
        .collect()
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Eigenpairs of the Lanczos tridiagonal, ascending.
fn ritz(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(tridiagonal(alpha, beta));
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(alpha.len(), alpha.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// The `k` lowest eigenpairs of a symmetric operator. Invariant subspaces are
/// handled by restarting with a fresh random direction orthogonal to the
/// basis, so exactly degenerate levels are resolved too. Pairs whose true
/// residual `‖Aψ − θψ‖` exceeds `tol` come back with `converged = false`.
pub fn lanczos<O: LinearOperator + ?Sized>(op: &O, opts: &LanczosOptions, start: Option<&[f64]>) -> LanczosOutcome {
    let len = op.len();
    let domain_size = (0..len).filter(|&i| op.in_domain(i)).count();
    let k = opts.k.min(domain_size);
    let mmax = opts.maxiter.max(k).min(domain_size);
    let mut rng = aux_rng(opts.seed, STREAM_LANCZOS);

    let mut q = match start {
        Some(s) => s.to_vec(),
        None => random_domain_vector(op, &mut rng),
    };
    let nq = norm(&q);
    q.iter_mut().for_each(|x| *x /= nq);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(mmax);
    let mut alpha: Vec<f64> = Vec::with_capacity(mmax);
    let mut beta: Vec<f64> = Vec::with_capacity(mmax);
    let mut w = vec![0.0; len];
    let mut next_check = k.max(4);
    let mut scale = 0.0f64;

    while basis.len() < mmax {
        op.apply_into(&q, &mut w);
        let a = dot(&q, &w);
        alpha.push(a);
        basis.push(std::mem::take(&mut q));
        orthogonalize(&mut w, &basis);
        let mut b = norm(&w);
        scale = scale.max(a.abs()).max(b);
        let m = basis.len();
        if m == mmax {
            beta.push(b);
            break;
        }
        if b <= 1e-12 * scale.max(1.0) {
            // Invariant subspace: continue in a fresh, decoupled direction.
            let mut fresh = random_domain_vector(op, &mut rng);
            orthogonalize(&mut fresh, &basis);
            let nf = norm(&fresh);
            if nf <= 1e-12 {
                beta.push(0.0);
                break;
            }
            fresh.iter_mut().for_each(|x| *x /= nf);
            q = fresh;
            b = 0.0;
        } else {
            q = w.iter().map(|x| x / b).collect();
        }
        beta.push(b);

        if b > 0.0 && m >= next_check && m >= k {
            let (_, vecs) = ritz(&alpha, &beta[..m - 1]);
            if (0..k).all(|i| (b * vecs[(m - 1, i)]).abs() <= 0.1 * opts.tol) {
                break;
            }
            next_check = m + (m / 8).max(4);
        }
    }

    let m = basis.len();
    let (vals, vecs) = ritz(&alpha, &beta[..m.saturating_sub(1)]);
    let kk = k.min(m);
    let mut out = LanczosOutcome {
        values: vals[..kk].to_vec(),
        vectors: Vec::new(),
        residuals: Vec::with_capacity(kk),
        converged: Vec::with_capacity(kk),
        iterations: m,
    };
    let mut y = vec![0.0; len];
    for i in 0..kk {
        let mut v = vec![0.0; len];
        for (j, qj) in basis.iter().enumerate() {
            axpy(vecs[(j, i)], qj, &mut v);
        }
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        op.apply_into(&v, &mut y);
        let theta = vals[i];
        let r = y
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - theta * b).powi(2))
            .sum::<f64>()
            .sqrt();
        out.residuals.push(r);
        out.converged.push(r <= opts.tol);
        if opts.want_vectors {
            out.vectors.push(v);
        }
    }
    out
}

/// Gauss quadrature of the spectral measure of `op` at a unit start vector:
/// nodes `θ_i` and weights `w_i` with `⟨v|f(A)|v⟩ ≈ Σ w_i f(θ_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `ln Σ w_i e^{−β θ_i}`.
    pub fn ln_laplace(&self, beta: f64) -> f64 {
        let m = self
            .nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&t, _)| -beta * t)
            .fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * (-beta * t - m).exp())
            .sum();
        m + s.ln()
    }
}

fn gauss_from(alpha: &[f64], beta: &[f64]) -> GaussRule {
    let (vals, vecs) = ritz(alpha, beta);
    let weights = (0..alpha.len()).map(|i| vecs[(0, i)].powi(2)).collect();
    GaussRule {
        nodes: vals,
        weights,
    }
}

/// Lanczos without reorthogonalization from `start` (normalized inside),
/// stopped once `ln ⟨v|e^{−βA}|v⟩` moves by less than `rel_tol` for every
/// `β` in `betas`, or at `max_steps`.
pub fn gauss_rule<O: LinearOperator + ?Sized>(
    op: &O,
    start: &[f64],
    betas: &[f64],
    rel_tol: f64,
    max_steps: usize,
) -> GaussRule {
    let len = op.len();
    let nrm = norm(start);
    let mut q: Vec<f64> = start.iter().map(|x| x / nrm).collect();
    let mut q_prev = vec![0.0; len];
    let mut w = vec![0.0; len];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last: Option<Vec<f64>> = None;
    loop {
        op.apply_into(&q, &mut w);
        let a = dot(&q, &w);
        alpha.push(a);
        let b_prev = beta.last().copied().unwrap_or(0.0);
        for i in 0..len {
            w[i] -= a * q[i] + b_prev * q_prev[i];
        }
        let b = norm(&w);
        let m = alpha.len();
        if m >= 2 || b <= 1e-14 {
            let rule = gauss_from(&alpha, &beta);
            let cur: Vec<f64> = betas.iter().map(|&bt| rule.ln_laplace(bt)).collect();
            let settled = last
                .as_ref()
                .map(|l| l.iter().zip(&cur).all(|(x, y)| (x - y).abs() <= rel_tol))
                .unwrap_or(false);
            if settled || b <= 1e-14 * a.abs().max(1.0) || m >= max_steps {
                return rule;
            }
            last = Some(cur);
        }
        beta.push(b);
        std::mem::swap(&mut q_prev, &mut q);
        for i in 0..len {
            q[i] = w[i] / b;
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradients for a positive definite `op`; `b` must be supported on
/// the domain.
pub fn conjugate_gradient<O: LinearOperator + ?Sized>(op: &O, b: &[f64], rel_tol: f64, maxiter: usize) -> CgOutcome {
    let len = op.len();
    let bn = norm(b);
    let mut x = vec![0.0; len];
    if bn == 0.0 {
        return CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; len];
    let mut rr = dot(&r, &r);
    let mut it = 0;
    while it < maxiter && rr.sqrt() > 0.5 * rel_tol * bn {
        op.apply_into(&p, &mut ap);
        let a = rr / dot(&p, &ap);
        axpy(a, &p, &mut x);
        axpy(-a, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let bta = rr_new / rr;
        for (pv, rv) in p.iter_mut().zip(&r) {
            *pv = rv + bta * *pv;
        }
        rr = rr_new;
        it += 1;
    }
    // Report the true residual, not the recursively updated one.
    op.apply_into(&x, &mut ap);
    let res = b.iter().zip(&ap).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt() / bn;
    CgOutcome {
        x,
        iterations: it,
        relative_residual: res,
        converged: res <= rel_tol,
    }
}

/// `op − shift`, restricted to the domain of `op`.
pub struct Shifted<'a, O: LinearOperator + ?Sized> {
    pub op: &'a O,
    pub shift: f64,
}

impl<O: LinearOperator + ?Sized> LinearOperator for Shifted<'_, O> {
    fn len(&self) -> usize {
        self.op.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_into(x, y);
        for (i, (yv, xv)) in y.iter_mut().zip(x).enumerate() {
            if self.op.in_domain(i) {
                *yv -= self.shift * xv;
            }
        }
    }

    fn in_domain(&self, i: usize) -> bool {
        self.op.in_domain(i)
    }
}

/// `−op`, for largest eigenvalues via [`lanczos`].
pub struct Negated<'a, O: LinearOperator + ?Sized>(pub &'a O);

impl<O: LinearOperator + ?Sized> LinearOperator for Negated<'_, O> {
    fn len(&self) -> usize {
        self.0.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_into(x, y);
        y.iter_mut().for_each(|v| *v = -*v);
    }

    fn in_domain(&self, i: usize) -> bool {
        self.0.in_domain(i)
    }
}
