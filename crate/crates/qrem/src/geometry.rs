//! Large-deviation geometry: deep holes, `(k,ε)`-components and their
//! clusters, and the tripartition of the cube by `|U|`.

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{QremError, Result};
use crate::hypercube::{ball, binary_entropy, hamming_distance, Configuration};
use crate::predictions::beta_c;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeepHoleScope {
    Local { center: u32 },
    Global,
    SymmetrizedGlobal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `|U(σ′)| ≤ εN` on the punctured ball.
    #[serde(rename = "1a")]
    QuietBall,
    /// `u(σ) ≤ N^{−1/4}`.
    #[serde(rename = "1b")]
    NeighborMass,
    /// Balls around distinct deep sites are disjoint.
    #[serde(rename = "2b")]
    Disjoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    /// The deep site whose ball is checked.
    pub site: u32,
    /// Offending configuration (the loud site, or the other deep site).
    pub witness: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepHoleReport {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub radius: usize,
    pub scope: DeepHoleScope,
    pub holds: bool,
    pub violations: Vec<Violation>,
    /// `2γ(3α) + δ(2β_c − δ) < ε²` fails.
    pub parameter_warning: bool,
}

/// Whether `(ε, δ, α)` satisfies `2γ(3α) + δ(2β_c − δ) < ε²`.
pub fn admissible(eps: f64, delta: f64, alpha: f64) -> bool {
    match binary_entropy(3.0 * alpha) {
        Ok(h) => 2.0 * h + delta * (2.0 * beta_c() - delta) < eps * eps,
        Err(_) => false,
    }
}

/// Largest `α ≤ 1/6` admissible for `(ε, δ)`, further restricted by
/// `2Γ√(α(1−α)) + ε < β_c − 2δ` when `gamma` is given.
pub fn max_admissible_alpha(eps: f64, delta: f64, gamma: Option<f64>) -> Option<f64> {
    let ok = |a: f64| {
        admissible(eps, delta, a)
            && gamma.map_or(true, |g| 2.0 * g * (a * (1.0 - a)).sqrt() + eps < beta_c() - 2.0 * delta)
    };
    // Both constraints are monotone in α on (0, 1/6].
    let (mut lo, mut hi) = (0.0, 1.0 / 6.0);
    if ok(hi) {
        return Some(hi);
    }
    if !ok(1e-12) {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

fn local_violations(u: &DisorderField, eps: f64, radius: usize, site: u32, out: &mut Vec<Violation>) {
    let n = u.n as f64;
    let center = u.config(site);
    for s in ball(center, radius) {
        if s.bits != site && u.at(s).abs() > eps * n {
            out.push(Violation { condition: Condition::QuietBall, site, witness: s.bits });
        }
    }
    if u.neighbor_stats(center).u > n.powf(-0.25) {
        out.push(Violation { condition: Condition::NeighborMass, site, witness: site });
    }
}

pub fn check_deep_hole(
    u: &DisorderField,
    eps: f64,
    delta: f64,
    alpha: f64,
    scope: DeepHoleScope,
) -> Result<DeepHoleReport> {
    if !(eps > 0.0 && delta > 0.0 && alpha > 0.0 && alpha < 0.5) {
        return Err(QremError::InvalidArgument(format!(
            "need ε, δ > 0 and 0 < α < 1/2, got ({eps}, {delta}, {alpha})"
        )));
    }
    let radius = (alpha * u.n as f64).floor() as usize;
    let mut violations = Vec::new();
    match scope {
        DeepHoleScope::Local { center } => {
            if (center as u64) >> u.n != 0 {
                return Err(QremError::InvalidArgument(format!("center {center} outside N = {}", u.n)));
            }
            local_violations(u, eps, radius, center, &mut violations);
        }
        DeepHoleScope::Global | DeepHoleScope::SymmetrizedGlobal => {
            let sym = scope == DeepHoleScope::SymmetrizedGlobal;
            let sites: Vec<u32> = u
                .large_deviation_set(beta_c() - delta, sym)
                .iter()
                .map(|c| c.bits)
                .collect();
            for &s in &sites {
                local_violations(u, eps, radius, s, &mut violations);
            }
            for (i, &a) in sites.iter().enumerate() {
                for &b in &sites[i + 1..] {
                    if hamming_distance(a, b) <= 2 * radius {
                        violations.push(Violation { condition: Condition::Disjoint, site: a, witness: b });
                    }
                }
            }
        }
    }
    Ok(DeepHoleReport {
        epsilon: eps,
        delta,
        alpha,
        radius,
        scope,
        holds: violations.is_empty(),
        violations,
        parameter_warning: !admissible(eps, delta, alpha),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSet {
    pub k: usize,
    pub epsilon: f64,
    /// Each component sorted by bits; components sorted by first member.
    pub components: Vec<Vec<u32>>,
    /// `C_k(G) = ∪_{σ∈G} B_k(σ)`, sorted.
    pub clusters: Vec<Vec<u32>>,
}

impl ComponentSet {
    /// Members of singleton components.
    pub fn isolated(&self) -> Vec<u32> {
        self.components.iter().filter(|c| c.len() == 1).map(|c| c[0]).collect()
    }

    pub fn is_isolated(&self, bits: u32) -> bool {
        self.components.iter().any(|c| c.len() == 1 && c[0] == bits)
    }
}

pub fn components(u: &DisorderField, k: usize, eps: f64) -> ComponentSet {
    let mut sites: Vec<u32> = u.large_deviation_set(eps, false).iter().map(|c| c.bits).collect();
    sites.sort_unstable();
    let mut uf = UnionFind::<usize>::new(sites.len());
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            if hamming_distance(sites[i], sites[j]) <= 2 * k + 2 {
                uf.union(i, j);
            }
        }
    }
    let labels = uf.into_labeling();
    let mut groups: std::collections::BTreeMap<usize, Vec<u32>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(sites[i]);
    }
    let mut comps: Vec<Vec<u32>> = groups.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    let clusters = comps
        .iter()
        .map(|g| {
            let mut c: Vec<u32> = g
                .iter()
                .flat_map(|&s| ball(Configuration { bits: s, n: u.n }, k).map(|x| x.bits))
                .collect();
            c.sort_unstable();
            c.dedup();
            c
        })
        .collect();
    ComponentSet { k, epsilon: eps, components: comps, clusters }
}

/// `|L_{a,b} ∖ I_{k,ε}| / |L_{a,b}|` with `L_{a,b} = {−bN < U ≤ −aN}`;
/// `None` when `L_{a,b}` is empty.
pub fn non_isolated_fraction(u: &DisorderField, set: &ComponentSet, a: f64, b: f64) -> Option<f64> {
    let n = u.n as f64;
    let isolated: std::collections::HashSet<u32> = set.isolated().into_iter().collect();
    let members: Vec<u32> = (0..u.len() as u32)
        .filter(|&s| {
            let v = u.values[s as usize];
            v <= -a * n && v > -b * n
        })
        .collect();
    if members.is_empty() {
        return None;
    }
    let bad = members.iter().filter(|s| !isolated.contains(s)).count();
    Some(bad as f64 / members.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tripartition {
    pub a1: Vec<u32>,
    pub a2: Vec<u32>,
    pub a3: Vec<u32>,
}

pub fn tripartition(u: &DisorderField, eps: f64, delta: f64) -> Result<Tripartition> {
    let top = beta_c() - delta;
    if !(eps > 0.0 && eps < top) {
        return Err(QremError::InvalidArgument(format!(
            "need 0 < ε < β_c − δ = {top}, got ε = {eps}"
        )));
    }
    let n = u.n as f64;
    let mut t = Tripartition { a1: Vec::new(), a2: Vec::new(), a3: Vec::new() };
    for (i, v) in u.values.iter().enumerate() {
        let a = v.abs();
        let slot = if a <= eps * n {
            &mut t.a1
        } else if a <= top * n {
            &mut t.a2
        } else {
            &mut t.a3
        };
        slot.push(i as u32);
    }
    Ok(t)
}
