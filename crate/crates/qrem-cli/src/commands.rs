use anyhow::Result;
use qrem::analysis::{
    extreme_ensemble, ks_gumbel, rw_distance_law, rw_envelope, rw_sojourn, rw_transition, sigma0_mismatch,
};
use qrem::disorder::sample_rem;
use qrem::eigensolve::{count_level_clusters, dense_spectrum, gap_sweep, lanczos_extremal, GapMethod};
use qrem::geometry::{check_deep_hole, Condition, DeepHoleScope};
use qrem::green::{dense_green_column, riccati_profile, t_ball_norm};
use qrem::krylov::LanczosOptions;
use qrem::operators::OperatorSpec;
use qrem::predictions::{
    beta_c, free_energy_correction, ground_state_prediction, paramagnetic_levels, phase_point, phase_row,
    spin_glass_energy,
};
use qrem::thermo::{correction_measurement, PressureMethod};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CommandConfig, GapSolver, HoleScope, SpectrumSolver, ThermoMethod};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Bool(bool),
    Text(String),
    Missing(Option<()>),
}

impl Cell {
    pub fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // Shortest round-trip form, exponent notation for small and large values.
            Cell::Num(v) => serde_json::to_string(v).unwrap_or_default(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
            Cell::Missing(_) => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        if v.is_finite() { Cell::Num(v) } else { Cell::Missing(None) }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map(Cell::from).unwrap_or(Cell::Missing(None))
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Column {
    pub name: &'static str,
    pub definition: &'static str,
}

const fn col(name: &'static str, definition: &'static str) -> Column {
    Column { name, definition }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Payload {
    pub summary: Value,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Rows from non-converged solves.
    pub flagged: usize,
}

pub fn run(cmd: &CommandConfig) -> Result<Payload> {
    match cmd {
        CommandConfig::Spectrum { n, gamma, seed, k, solver, tol, maxiter, eta, radius } => {
            spectrum(*n, *gamma, *seed, *k, *solver, (*tol, *maxiter), *eta, *radius)
        }
        CommandConfig::Green { n, k, energy } => green(*n, *k, *energy),
        CommandConfig::Thermo { n, beta, gamma, seeds, method, samples, levels } => {
            let method = match method {
                ThermoMethod::Dense => PressureMethod::DenseTrace,
                ThermoMethod::Quadrature => PressureMethod::DiagonalQuadrature { samples: *samples },
                ThermoMethod::Truncated => PressureMethod::LowEnergyTruncated { k: *levels },
            };
            thermo(&n.values(), *beta, *gamma, &seeds.resolve(), method)
        }
        CommandConfig::Ensemble { n, gamma, seeds, mismatch } => ensemble(*n, *gamma, &seeds.resolve(), *mismatch),
        CommandConfig::Phase { beta, gamma } => Ok(phase(beta, gamma)),
        CommandConfig::Gap { n, seed, gamma_lo, gamma_hi, points, tol, solver } => {
            let method = match solver {
                GapSolver::Dense => GapMethod::Dense,
                GapSolver::Lanczos => GapMethod::Lanczos,
            };
            gap(*n, *seed, (*gamma_lo, *gamma_hi), *points, *tol, method)
        }
        CommandConfig::Rw { n, alpha, w_size, t, trials, seed } => rw(*n, *alpha, *w_size, *t, *trials, *seed),
        CommandConfig::Deephole { n, seeds, epsilon, delta, alpha, scope } => {
            let scope = match scope {
                HoleScope::Global => DeepHoleScope::Global,
                HoleScope::Symmetrized => DeepHoleScope::SymmetrizedGlobal,
            };
            deephole(*n, &seeds.resolve(), *epsilon, *delta, *alpha, scope)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn spectrum(
    n: usize,
    gamma: f64,
    seed: u64,
    k: usize,
    solver: SpectrumSolver,
    (tol, maxiter): (f64, usize),
    eta: f64,
    radius: f64,
) -> Result<Payload> {
    let u = sample_rem(n, seed)?;
    let spec = OperatorSpec::full(gamma, &u);
    let dense = solver == SpectrumSolver::Dense || (solver == SpectrumSolver::Auto && n <= 10);
    let res = if dense {
        let mut r = dense_spectrum(&spec, false)?;
        r.eigenvalues.truncate(k);
        r.residuals.truncate(k);
        r.converged.truncate(k);
        r
    } else {
        lanczos_extremal(&spec, &LanczosOptions::lowest(k).tol(tol).maxiter(maxiter).seed(seed))?
    };
    let (levels, level_warning) = paramagnetic_levels(n, gamma, eta);
    let centers: Vec<f64> = levels.iter().map(|l| l.center).collect();
    let clusters = count_level_clusters(&res.eigenvalues, &centers, radius).ok();
    let mut lows = u.values.clone();
    lows.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    let mut flagged = 0;
    for (i, ((&e, &r), &ok)) in res.eigenvalues.iter().zip(&res.residuals).zip(&res.converged).enumerate() {
        let nearest = centers.iter().copied().min_by(|a, b| (a - e).abs().total_cmp(&(b - e).abs()));
        let glass = lows.get(i).filter(|v| **v < 0.0).map(|v| spin_glass_energy(n, gamma, *v));
        flagged += !ok as usize;
        rows.push(vec![i.into(), e.into(), r.into(), nearest.into(), glass.into(), ok.into()]);
    }
    Ok(Payload {
        summary: json!({
            "n": n,
            "gamma": gamma,
            "seed": seed,
            "solver": if dense { "dense" } else { "lanczos" },
            "iterations": res.iterations,
            "converged": res.all_converged(),
            "min_u": u.min(),
            "ground_prediction": ground_state_prediction(n, gamma, u.min()),
            "paramagnetic_levels": levels,
            "level_warning": level_warning,
            "cluster_radius": radius,
            "cluster_counts": clusters.as_ref().map(|c| &c.counts),
            "uncaptured": clusters.as_ref().map(|c| &c.uncaptured),
        }),
        columns: vec![
            col("index", "rank of the eigenvalue, 0 = ground state"),
            col("eigenvalue", "measured eigenvalue of H = Gamma T + U"),
            col("residual", "||H psi - E psi||"),
            col("paramagnet_center", "nearest predicted level (2n-N)Gamma + N/((2n-N)Gamma); empty if none"),
            col("spin_glass_prediction", "U + Gamma^2 N / U for the site with the same rank in U; empty if U >= 0"),
            col("converged", "solver reports the eigenpair converged"),
        ],
        rows,
        flagged,
    })
}

fn green(n: usize, k: usize, energy: f64) -> Result<Payload> {
    let p = riccati_profile(k, n, energy)?;
    let oracle = if n <= 12 { Some(dense_green_column(k, n, energy)?) } else { None };
    let mut max_delta: Option<f64> = None;
    let rows = (0..=k)
        .map(|d| {
            let o = oracle.as_ref().map(|o| o[d]);
            let delta = o.map(|o| (o - p.green[d]).abs());
            if let Some(x) = delta {
                max_delta = Some(max_delta.unwrap_or(0.0).max(x));
            }
            vec![d.into(), p.factors[d].into(), p.green[d].into(), p.renormalized[d].into(), o.into(), delta.into()]
        })
        .collect();
    Ok(Payload {
        summary: json!({
            "n": n,
            "k": k,
            "energy": energy,
            "t_ball_norm": t_ball_norm(k, n)?,
            "max_oracle_delta": max_delta,
        }),
        columns: vec![
            col("d", "distance from the ball center"),
            col("factor", "Riccati ratio G(d)/G(d-1); G(0) at d = 0"),
            col("green", "G_K(d;E) = <delta_sigma|(T_K - E)^-1|delta_0> for |sigma| = d"),
            col("renormalized", "sqrt(C(N,d)) G_K(d;E)"),
            col("oracle", "dense resolvent column at distance d; empty for N > 12"),
            col("oracle_delta", "|oracle - green|"),
        ],
        rows,
        flagged: 0,
    })
}

fn thermo(ns: &[usize], beta: f64, gamma: f64, seeds: &[u64], method: PressureMethod) -> Result<Payload> {
    let s = correction_measurement(beta, gamma, ns, seeds, method)?;
    let flagged = s.rows.iter().map(|r| r.flagged).sum();
    let rows = s
        .rows
        .iter()
        .map(|r| vec![r.n.into(), r.mean.into(), r.stderr.into(), r.prediction.into(), r.flagged.into()])
        .collect();
    Ok(Payload {
        summary: json!({
            "beta": beta,
            "gamma": gamma,
            "regime": s.regime,
            "method": method,
            "seeds": seeds.len(),
            "prediction": free_energy_correction(beta, gamma)?,
        }),
        columns: vec![
            col("n", "number of spins N"),
            col("mean", "seed mean of Phi_N(beta,Gamma) minus its leading term (N ln cosh(beta Gamma) or Phi_N(beta,0))"),
            col("stderr", "standard error of the seed mean"),
            col("prediction", "limiting correction"),
            col("flagged", "seeds whose trace was flagged"),
        ],
        rows,
        flagged,
    })
}

fn ensemble(n: usize, gamma: f64, seeds: &[u64], mismatch: bool) -> Result<Payload> {
    let e = extreme_ensemble(n, gamma, seeds)?;
    let mut samples = e.samples.iter();
    let rows = seeds
        .iter()
        .map(|s| {
            let failed = e.failures.contains(s);
            let x = if failed { None } else { samples.next().copied() };
            vec![(*s).into(), x.into(), (!failed).into()]
        })
        .collect();
    let mism = if mismatch { Some(sigma0_mismatch(n, gamma, seeds)?) } else { None };
    Ok(Payload {
        summary: json!({
            "n": n,
            "gamma": gamma,
            "seeds": seeds.len(),
            "ks_to_gumbel": ks_gumbel(&e.samples),
            "failures": e.failures,
            "mismatch": mism.map(|m| json!({
                "rate": m.rate,
                "interval": m.interval,
                "min_u_hits": m.min_u_hits,
                "predictor_hits": m.predictor_hits,
            })),
        }),
        columns: vec![
            col("seed", "disorder seed"),
            col("rescaled", "x with E0 = s_N(x; Gamma); empty if the solver did not converge"),
            col("converged", "ground-state solve converged"),
        ],
        rows,
        flagged: e.failures.len(),
    })
}

fn phase(betas: &[f64], gammas: &[f64]) -> Payload {
    let mut rows = Vec::new();
    for &b in betas {
        for &g in gammas {
            let r = phase_row(b, g);
            let regime = serde_json::to_value(phase_point(b, g).regime).unwrap();
            rows.push(vec![
                b.into(),
                g.into(),
                regime.as_str().unwrap_or_default().into(),
                r.pressure.into(),
                r.correction.into(),
            ]);
        }
    }
    Payload {
        summary: json!({ "beta_c": beta_c() }),
        columns: vec![
            col("beta", "inverse temperature"),
            col("gamma", "transverse field strength"),
            col("regime", "rem-classical | rem-frozen | quantum-paramagnet | critical-line"),
            col("pressure", "limiting pressure max(p_REM(beta), ln cosh(beta Gamma))"),
            col("correction", "limiting O(1) free-energy correction; empty on the critical line"),
        ],
        rows,
        flagged: 0,
    }
}

fn gap(n: usize, seed: u64, range: (f64, f64), points: usize, tol: f64, method: GapMethod) -> Result<Payload> {
    let u = sample_rem(n, seed)?;
    let s = gap_sweep(&u, range, points, tol, method, seed)?;
    let mut rows: Vec<Vec<Cell>> = s
        .gamma_grid
        .iter()
        .zip(&s.gaps)
        .zip(&s.flags)
        .map(|((g, d), f)| vec!["grid".into(), (*g).into(), (*d).into(), (*f).into()])
        .collect();
    rows.extend(
        s.refinement_trace
            .iter()
            .map(|p| vec!["refine".into(), p.gamma.into(), p.gap.into(), p.converged.into()]),
    );
    let flagged = rows.iter().filter(|r| r[3] == Cell::Bool(false)).count();
    Ok(Payload {
        summary: json!({
            "n": n,
            "seed": seed,
            "min_gap": s.min_gap,
            "argmin_gamma": s.argmin_gamma,
            "predicted_gamma": s.predicted_gamma,
            "method": method,
        }),
        columns: vec![
            col("stage", "grid = coarse sweep, refine = golden-section point"),
            col("gamma", "transverse field strength"),
            col("gap", "E1 - E0"),
            col("converged", "both eigenvalues converged"),
        ],
        rows,
        flagged,
    })
}

fn rw(n: usize, alpha: f64, w_size: Option<usize>, t: f64, trials: usize, seed: u64) -> Result<Payload> {
    let steps = (alpha * n as f64).floor() as usize;
    let law = rw_distance_law(n, steps);
    let rows = (0..=n)
        .map(|d| Ok(vec![d.into(), law[d].into(), rw_transition(n, steps, d)?.into()]))
        .collect::<Result<Vec<_>>>()?;
    let sojourn = match w_size {
        Some(w) => Some(rw_sojourn(n, w, alpha, t, trials, seed)?),
        None => None,
    };
    Ok(Payload {
        summary: json!({
            "n": n,
            "alpha": alpha,
            "steps": steps,
            "envelope": rw_envelope(n, alpha)?,
            "sojourn": sojourn,
        }),
        columns: vec![
            col("d", "Hamming distance from the start"),
            col("law", "P(walk is at distance d after floor(alpha N) steps)"),
            col("transition", "probability of one fixed site at distance d"),
        ],
        rows,
        flagged: 0,
    })
}

fn deephole(n: usize, seeds: &[u64], eps: f64, delta: f64, alpha: f64, scope: DeepHoleScope) -> Result<Payload> {
    let mut rows = Vec::new();
    let mut holds = 0;
    let mut warning = false;
    let mut radius = 0;
    for &s in seeds {
        let u = sample_rem(n, s)?;
        let r = check_deep_hole(&u, eps, delta, alpha, scope)?;
        let count = |c: Condition| r.violations.iter().filter(|v| v.condition == c).count();
        let deep = u.large_deviation_set(beta_c() - delta, scope == DeepHoleScope::SymmetrizedGlobal).len();
        holds += r.holds as usize;
        warning = r.parameter_warning;
        radius = r.radius;
        rows.push(vec![
            s.into(),
            r.holds.into(),
            deep.into(),
            count(Condition::QuietBall).into(),
            count(Condition::NeighborMass).into(),
            count(Condition::Disjoint).into(),
        ]);
    }
    Ok(Payload {
        summary: json!({
            "n": n,
            "epsilon": eps,
            "delta": delta,
            "alpha": alpha,
            "radius": radius,
            "scope": scope,
            "hold_fraction": holds as f64 / seeds.len() as f64,
            "parameter_warning": warning,
        }),
        columns: vec![
            col("seed", "disorder seed"),
            col("holds", "every condition holds"),
            col("deep_sites", "sites with U <= -(beta_c - delta)N"),
            col("quiet_ball", "violations of |U| <= eps N on punctured balls"),
            col("neighbor_mass", "deep sites with neighbor mass above N^(-1/4)"),
            col("disjoint", "pairs of deep sites with overlapping balls"),
        ],
        rows,
        flagged: 0,
    })
}
