//! Matrix-free Hamiltonians on the Hamming cube and its subdomains, spectral
//! projections of `T`, and the semigroup kernel of `T`.
//!
//! Every operator acts on full-length `2^N` vectors. Restricted operators
//! ignore off-domain input and write zeros off-domain, so Hadamard tricks and
//! dense oracles work on one index space.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{QremError, Result};
use crate::hypercube::{self, adjacency_accumulate, binomial, check_dimension, fwht_in_place, StateVector};

/// Dense assemblies are oracles only.
pub const DENSE_MAX_N: usize = 13;

const NONE: u32 = u32::MAX;

/// Anything Lanczos or CG can iterate on.
pub trait LinearOperator {
    /// Length of the vectors acted on.
    fn len(&self) -> usize;

    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    /// Whether index `i` belongs to the domain. Start vectors are masked
    /// with this so Krylov spaces never leave the domain.
    fn in_domain(&self, _i: usize) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Full,
    Ball { center: u32, radius: usize },
    Cluster { vertices: Vec<u32> },
    Complement { vertices: Vec<u32> },
    DirectSum { parts: Vec<Domain> },
    /// Edges between `S_R(c)` and `S_{R+1}(c)` for each center; no diagonal.
    BoundaryHopping { centers: Vec<u32>, radius: usize },
}

#[derive(Clone, Debug)]
pub struct OperatorSpec<'a> {
    pub n: usize,
    pub gamma: f64,
    pub disorder: Option<&'a DisorderField>,
    pub domain: Domain,
    /// Sets `U(center) = 0` for a ball domain (the operator `H′_{αN}(σ)`).
    pub zero_center_potential: bool,
}

impl<'a> OperatorSpec<'a> {
    pub fn full(gamma: f64, disorder: &'a DisorderField) -> Self {
        Self {
            n: disorder.n,
            gamma,
            disorder: Some(disorder),
            domain: Domain::Full,
            zero_center_potential: false,
        }
    }

    pub fn pure_t(n: usize, gamma: f64) -> Self {
        Self {
            n,
            gamma,
            disorder: None,
            domain: Domain::Full,
            zero_center_potential: false,
        }
    }

    pub fn ball(gamma: f64, disorder: Option<&'a DisorderField>, n: usize, center: u32, radius: usize) -> Self {
        Self {
            n,
            gamma,
            disorder,
            domain: Domain::Ball { center, radius },
            zero_center_potential: false,
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn zero_center(mut self) -> Self {
        self.zero_center_potential = true;
        self
    }

    pub fn compile(&self) -> Result<CompiledOperator> {
        CompiledOperator::new(self)
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        let op = self.compile()?;
        if v.len() != op.len() {
            return Err(QremError::DimensionMismatch {
                expected: op.len(),
                got: v.len(),
            });
        }
        let mut out = vec![0.0; v.len()];
        op.apply_into(&v.amplitudes, &mut out);
        StateVector::from_vec(self.n, out)
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Full,
    Labeled { labels: Vec<u32> },
    Boundary { edges: Vec<(u32, u32)> },
}

/// An [`OperatorSpec`] resolved into index-level data.
#[derive(Clone, Debug)]
pub struct CompiledOperator {
    pub n: usize,
    pub gamma: f64,
    diag: Vec<f64>,
    kind: Kind,
}

fn mark(labels: &mut [u32], idx: u32, label: u32) -> Result<()> {
    let slot = &mut labels[idx as usize];
    if *slot != NONE && *slot != label {
        return Err(QremError::InvalidArgument(format!(
            "direct-sum parts overlap at configuration {idx}"
        )));
    }
    *slot = label;
    Ok(())
}

fn fill_labels(n: usize, domain: &Domain, labels: &mut [u32], next: &mut u32) -> Result<()> {
    let len = 1usize << n;
    match domain {
        Domain::Full => {
            for i in 0..len {
                mark(labels, i as u32, *next)?;
            }
        }
        Domain::Ball { center, radius } => {
            check_bits(n, *center)?;
            for s in hypercube::ball(hypercube::Configuration { bits: *center, n }, *radius) {
                mark(labels, s.bits, *next)?;
            }
        }
        Domain::Cluster { vertices } => {
            for &v in vertices {
                check_bits(n, v)?;
                mark(labels, v, *next)?;
            }
        }
        Domain::Complement { vertices } => {
            let mut inside = vec![false; len];
            for &v in vertices {
                check_bits(n, v)?;
                inside[v as usize] = true;
            }
            for (i, &skip) in inside.iter().enumerate() {
                if !skip {
                    mark(labels, i as u32, *next)?;
                }
            }
        }
        Domain::DirectSum { parts } => {
            for p in parts {
                fill_labels(n, p, labels, next)?;
            }
            return Ok(());
        }
        Domain::BoundaryHopping { .. } => {
            return Err(QremError::InvalidArgument(
                "boundary hopping cannot be a direct-sum part".into(),
            ))
        }
    }
    *next += 1;
    Ok(())
}

fn check_bits(n: usize, bits: u32) -> Result<()> {
    if (bits as u64) >> n != 0 {
        return Err(QremError::InvalidArgument(format!(
            "configuration {bits} outside N = {n}"
        )));
    }
    Ok(())
}

impl CompiledOperator {
    pub fn new(spec: &OperatorSpec) -> Result<Self> {
        check_dimension(spec.n)?;
        let len = 1usize << spec.n;
        let mut diag = match spec.disorder {
            Some(u) if u.n != spec.n => {
                return Err(QremError::DimensionMismatch {
                    expected: len,
                    got: u.len(),
                })
            }
            Some(u) => u.values.clone(),
            None => vec![0.0; len],
        };
        let kind = match &spec.domain {
            Domain::Full => Kind::Full,
            Domain::BoundaryHopping { centers, radius } => {
                let mut edges = Vec::new();
                for &c in centers {
                    check_bits(spec.n, c)?;
                    let center = hypercube::Configuration { bits: c, n: spec.n };
                    if *radius >= spec.n {
                        continue;
                    }
                    for s in hypercube::sphere(center, *radius)? {
                        for j in 0..spec.n {
                            let t = s.bits ^ (1 << j);
                            if hypercube::hamming_distance(t, c) == radius + 1 {
                                edges.push((s.bits, t));
                            }
                        }
                    }
                }
                diag.iter_mut().for_each(|d| *d = 0.0);
                Kind::Boundary { edges }
            }
            other => {
                let mut labels = vec![NONE; len];
                let mut next = 0;
                fill_labels(spec.n, other, &mut labels, &mut next)?;
                for (d, &l) in diag.iter_mut().zip(&labels) {
                    if l == NONE {
                        *d = 0.0;
                    }
                }
                Kind::Labeled { labels }
            }
        };
        if spec.zero_center_potential {
            match spec.domain {
                Domain::Ball { center, .. } => diag[center as usize] = 0.0,
                _ => {
                    return Err(QremError::InvalidArgument(
                        "zero_center_potential needs a ball domain".into(),
                    ))
                }
            }
        }
        Ok(Self {
            n: spec.n,
            gamma: spec.gamma,
            diag,
            kind,
        })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Indices of the domain in increasing order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.in_domain(i)).collect()
    }

    /// Dense matrix on the compacted support, with the index map.
    pub fn dense_on_support(&self) -> Result<(DMatrix<f64>, Vec<usize>)> {
        if self.n > DENSE_MAX_N {
            return Err(QremError::SizeCap {
                what: "dense N",
                value: self.n,
                cap: DENSE_MAX_N,
            });
        }
        let support = self.support();
        let m = support.len();
        let mut mat = DMatrix::zeros(m, m);
        let mut e = vec![0.0; self.len()];
        let mut col = vec![0.0; self.len()];
        for (k, &i) in support.iter().enumerate() {
            e[i] = 1.0;
            self.apply_into(&e, &mut col);
            e[i] = 0.0;
            for (r, &idx) in support.iter().enumerate() {
                mat[(r, k)] = col[idx];
            }
        }
        Ok((mat, support))
    }

    /// Dense `2^N × 2^N` matrix including the zero off-domain block.
    pub fn dense_full(&self) -> Result<DMatrix<f64>> {
        if self.n > DENSE_MAX_N {
            return Err(QremError::SizeCap {
                what: "dense N",
                value: self.n,
                cap: DENSE_MAX_N,
            });
        }
        let len = self.len();
        let mut mat = DMatrix::zeros(len, len);
        let mut e = vec![0.0; len];
        let mut col = vec![0.0; len];
        for k in 0..len {
            e[k] = 1.0;
            self.apply_into(&e, &mut col);
            e[k] = 0.0;
            mat.set_column(k, &nalgebra::DVector::from_column_slice(&col));
        }
        Ok(mat)
    }
}

impl LinearOperator for CompiledOperator {
    fn len(&self) -> usize {
        1 << self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match &self.kind {
            Kind::Full => {
                for ((yv, xv), d) in y.iter_mut().zip(x).zip(&self.diag) {
                    *yv = d * xv;
                }
                if self.gamma != 0.0 {
                    adjacency_accumulate(self.n, x, y, -self.gamma);
                }
            }
            Kind::Labeled { labels } => {
                for i in 0..y.len() {
                    let l = labels[i];
                    if l == NONE {
                        y[i] = 0.0;
                        continue;
                    }
                    let mut hop = 0.0;
                    for j in 0..self.n {
                        let t = i ^ (1 << j);
                        if labels[t] == l {
                            hop += x[t];
                        }
                    }
                    y[i] = self.diag[i] * x[i] - self.gamma * hop;
                }
            }
            Kind::Boundary { edges } => {
                y.iter_mut().for_each(|v| *v = 0.0);
                for &(a, b) in edges {
                    y[a as usize] += x[b as usize];
                    y[b as usize] += x[a as usize];
                }
            }
        }
    }

    fn in_domain(&self, i: usize) -> bool {
        match &self.kind {
            Kind::Full | Kind::Boundary { .. } => true,
            Kind::Labeled { labels } => labels[i] != NONE,
        }
    }
}

/// `‖T_K‖ ≤ 2√(K(N−K+1))` for `K ≤ N/2`.
pub fn operator_norm_bound_tk(k: usize, n: usize) -> Result<f64> {
    if 2 * k > n {
        return Err(QremError::InvalidArgument(format!(
            "norm bound needs K <= N/2, got K = {k}, N = {n}"
        )));
    }
    Ok(2.0 * ((k * (n - k + 1)) as f64).sqrt())
}

/// `⟨δ_σ|e^{−βT}|δ_σ′⟩ = (cosh β)^N (tanh β)^d` at `d(σ,σ′) = d`.
pub fn semigroup_kernel(beta: f64, d: usize, n: usize) -> Result<f64> {
    if beta < 0.0 || d > n {
        return Err(QremError::InvalidArgument(format!(
            "kernel needs β >= 0 and d <= N, got β = {beta}, d = {d}, N = {n}"
        )));
    }
    Ok(beta.cosh().powi(n as i32) * beta.tanh().powi(d as i32))
}

/// `(Σ_{|k−N/2| > εN/2} C(N,k), 2^{N+1} e^{−ε²N/2})`.
pub fn projection_dim(eps: f64, n: usize) -> Result<(u128, f64)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(QremError::InvalidArgument(format!(
            "ε must lie in (0,1), got {eps}"
        )));
    }
    let nf = n as f64;
    let exact = (0..=n)
        .filter(|&k| (k as f64 - nf / 2.0).abs() > eps * nf / 2.0)
        .map(|k| binomial(n, k))
        .sum();
    let chernoff = 2.0 * (nf * std::f64::consts::LN_2 - eps * eps * nf / 2.0).exp();
    Ok((exact, chernoff))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Edges of the spectrum of `T`, `|2|A| − N| ≥ εN`.
    P,
    /// Center of the spectrum of `T`, the open window `(−εN, εN)`.
    Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub epsilon: f64,
    pub side: Side,
}

impl ProjectionSpec {
    pub fn keeps(&self, n: usize, a_bits: u32) -> bool {
        let lam = hypercube::parity_eigenvalue(n, a_bits) as f64;
        let inside = lam.abs() < self.epsilon * n as f64;
        match self.side {
            Side::Q => inside,
            Side::P => !inside,
        }
    }

    /// Rank of the projection, counting boundary modes on the P side.
    pub fn rank(&self, n: usize) -> u128 {
        (0..=n)
            .filter(|&k| self.keeps(n, (1u32 << k) - 1))
            .map(|k| binomial(n, k))
            .sum()
    }

    pub fn project_in_place(&self, n: usize, v: &mut [f64]) {
        fwht_in_place(v);
        for (a, x) in v.iter_mut().enumerate() {
            if !self.keeps(n, a as u32) {
                *x = 0.0;
            }
        }
        fwht_in_place(v);
    }
}

pub fn project(spec: &ProjectionSpec, v: &StateVector) -> Result<StateVector> {
    let mut out = StateVector::from_vec(v.n, v.amplitudes.clone())?;
    spec.project_in_place(v.n, &mut out.amplitudes);
    Ok(out)
}
