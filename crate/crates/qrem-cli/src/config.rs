use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub const DENSE_MAX_N: usize = 13;
pub const MATRIX_FREE_MAX_N: usize = 26;
pub const MAX_SEEDS: usize = 10_000;

/// Inclusive integer range `a..b`, or a single value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl IntRange {
    pub fn values(&self) -> Vec<usize> {
        (self.lo..=self.hi).collect()
    }

    pub fn single(&self) -> Option<usize> {
        (self.lo == self.hi).then_some(self.lo)
    }
}

impl FromStr for IntRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("not an integer: {t:?}"));
        let r = match s.split_once("..") {
            Some((a, b)) => IntRange { lo: parse(a)?, hi: parse(b)? },
            None => {
                let v = parse(s)?;
                IntRange { lo: v, hi: v }
            }
        };
        if r.lo > r.hi {
            return Err(format!("empty range {s}"));
        }
        Ok(r)
    }
}

impl fmt::Display for IntRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.single() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "{}..{}", self.lo, self.hi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seeds {
    Count { base: u64, count: usize },
    List { seeds: Vec<u64> },
}

impl Seeds {
    pub fn resolve(&self) -> Vec<u64> {
        match self {
            Seeds::Count { base, count } => (0..*count as u64).map(|i| base + i).collect(),
            Seeds::List { seeds } => seeds.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Seeds::Count { count, .. } => *count,
            Seeds::List { seeds } => seeds.len(),
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct SeedArgs {
    /// Number of consecutive seeds starting at --seed-base.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    /// Explicit comma-separated seeds; overrides --seeds.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
}

impl SeedArgs {
    fn into_seeds(self) -> Seeds {
        match self.seed_list {
            Some(seeds) => Seeds::List { seeds },
            None => Seeds::Count { base: self.seed_base, count: self.seeds },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSolver {
    /// Dense for N <= 10, Lanczos above.
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ThermoMethod {
    Dense,
    Quadrature,
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GapSolver {
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum HoleScope {
    Global,
    Symmetrized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum CommandConfig {
    Spectrum {
        n: usize,
        gamma: f64,
        seed: u64,
        k: usize,
        solver: SpectrumSolver,
        tol: f64,
        maxiter: usize,
        eta: f64,
        radius: f64,
    },
    Green {
        n: usize,
        k: usize,
        energy: f64,
    },
    Thermo {
        n: IntRange,
        beta: f64,
        gamma: f64,
        seeds: Seeds,
        method: ThermoMethod,
        samples: usize,
        levels: usize,
    },
    Ensemble {
        n: usize,
        gamma: f64,
        seeds: Seeds,
        mismatch: bool,
    },
    Phase {
        beta: Vec<f64>,
        gamma: Vec<f64>,
    },
    Gap {
        n: usize,
        seed: u64,
        gamma_lo: f64,
        gamma_hi: f64,
        points: usize,
        tol: f64,
        solver: GapSolver,
    },
    Rw {
        n: usize,
        alpha: f64,
        w_size: Option<usize>,
        t: f64,
        trials: usize,
        seed: u64,
    },
    Deephole {
        n: usize,
        seeds: Seeds,
        epsilon: f64,
        delta: f64,
        alpha: f64,
        scope: HoleScope,
    },
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Spectrum { .. } => "spectrum",
            CommandConfig::Green { .. } => "green",
            CommandConfig::Thermo { .. } => "thermo",
            CommandConfig::Ensemble { .. } => "ensemble",
            CommandConfig::Phase { .. } => "phase",
            CommandConfig::Gap { .. } => "gap",
            CommandConfig::Rw { .. } => "rw",
            CommandConfig::Deephole { .. } => "deephole",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub stem: String,
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: CommandConfig,
    pub output: OutputConfig,
}

#[derive(Parser, Debug)]
#[command(name = "qrem", version, about = "Quantum random energy model toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    /// Output directory; defaults to $QREM_OUT_DIR, then the working directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// File stem of the payload and manifest; defaults to the command name.
    #[arg(long, global = true)]
    pub name: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Lowest eigenvalues beside paramagnetic and spin-glass predictions.
    Spectrum {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, value_enum, default_value_t = SpectrumSolver::Auto)]
        solver: SpectrumSolver,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Lanczos iteration cap.
        #[arg(long, default_value_t = 600)]
        maxiter: usize,
        /// Margin η in the paramagnetic level threshold −(β_c + 2η)N.
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        /// Window radius for cluster counts.
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
    },
    /// Radial Green function of T on a Hamming ball, with dense oracle deltas.
    Green {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        energy: f64,
    },
    /// Free-energy correction series over a range of N.
    Thermo {
        #[arg(long)]
        n: IntRange,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long, value_enum, default_value_t = ThermoMethod::Quadrature)]
        method: ThermoMethod,
        /// Diagonal samples for the quadrature method.
        #[arg(long, default_value_t = 256)]
        samples: usize,
        /// Eigenvalues kept by the truncated method.
        #[arg(long, default_value_t = 64)]
        levels: usize,
    },
    /// Rescaled ground energies and their distance to the Gumbel law.
    Ensemble {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        seeds: SeedArgs,
        /// Also report the ground-state site mismatch rate.
        #[arg(long)]
        mismatch: bool,
    },
    /// Limiting pressure and regime on an explicit (β, Γ) grid.
    Phase {
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
    },
    /// Spectral gap sweep in Γ with refinement near the minimum.
    Gap {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        gamma_lo: f64,
        /// Defaults to 2β_c.
        #[arg(long)]
        gamma_hi: Option<f64>,
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = GapSolver::Lanczos)]
        solver: GapSolver,
    },
    /// Random-walk distance law after αN steps, with an optional sojourn estimate.
    Rw {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        /// Size of the target set W; enables the sojourn estimate.
        #[arg(long)]
        w_size: Option<usize>,
        #[arg(long, default_value_t = 0.125)]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Deep-hole scenario check per seed.
    Deephole {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        seeds: SeedArgs,
        /// Defaults to β_c/2.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Defaults to the largest admissible α for (ε, δ), and for Γ if given.
        #[arg(long)]
        alpha: Option<f64>,
        /// Field strength entering the default α.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, value_enum, default_value_t = HoleScope::Global)]
        scope: HoleScope,
    },
    /// Re-run the configuration recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os("QREM_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

impl Cmd {
    /// `None` for `replay`, whose configuration comes from a file.
    pub fn into_command(self) -> Result<Option<CommandConfig>, ConfigError> {
        Ok(Some(match self {
            Cmd::Spectrum { n, gamma, seed, k, solver, tol, maxiter, eta, radius } => {
                CommandConfig::Spectrum { n, gamma, seed, k, solver, tol, maxiter, eta, radius }
            }
            Cmd::Green { n, k, energy } => CommandConfig::Green { n, k, energy },
            Cmd::Thermo { n, beta, gamma, seeds, method, samples, levels } => CommandConfig::Thermo {
                n,
                beta,
                gamma,
                seeds: seeds.into_seeds(),
                method,
                samples,
                levels,
            },
            Cmd::Ensemble { n, gamma, seeds, mismatch } => {
                CommandConfig::Ensemble { n, gamma, seeds: seeds.into_seeds(), mismatch }
            }
            Cmd::Phase { beta, gamma } => CommandConfig::Phase { beta, gamma },
            Cmd::Gap { n, seed, gamma_lo, gamma_hi, points, tol, solver } => CommandConfig::Gap {
                n,
                seed,
                gamma_lo,
                gamma_hi: gamma_hi.unwrap_or(2.0 * qrem::predictions::beta_c()),
                points,
                tol,
                solver,
            },
            Cmd::Rw { n, alpha, w_size, t, trials, seed } => CommandConfig::Rw { n, alpha, w_size, t, trials, seed },
            Cmd::Deephole { n, seeds, epsilon, delta, alpha, gamma, scope } => {
                let epsilon = epsilon.unwrap_or(qrem::predictions::beta_c() / 2.0);
                let alpha = match alpha {
                    Some(a) => a,
                    None => qrem::geometry::max_admissible_alpha(epsilon, delta, gamma).ok_or_else(|| {
                        ConfigError(format!("no admissible alpha for epsilon = {epsilon}, delta = {delta}"))
                    })?,
                };
                CommandConfig::Deephole { n, seeds: seeds.into_seeds(), epsilon, delta, alpha, scope }
            }
            Cmd::Replay { .. } => return Ok(None),
        }))
    }
}

fn check_n(n: usize, dense: bool) -> Result<(), ConfigError> {
    let cap = if dense { DENSE_MAX_N } else { MATRIX_FREE_MAX_N };
    if n == 0 || n > cap {
        let kind = if dense { "dense" } else { "matrix-free" };
        return bad(format!("N = {n} outside 1..={cap} ({kind} cap)"));
    }
    Ok(())
}

fn check_seeds(seeds: &Seeds) -> Result<(), ConfigError> {
    match seeds.len() {
        0 => bad("at least one seed is required"),
        c if c > MAX_SEEDS => bad(format!("{c} seeds exceed the cap of {MAX_SEEDS}")),
        _ => Ok(()),
    }
}

fn check_nonneg(name: &str, x: f64) -> Result<(), ConfigError> {
    if !(x.is_finite() && x >= 0.0) {
        return bad(format!("{name} must be finite and >= 0, got {x}"));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<(), ConfigError> {
    if !(x.is_finite() && x > 0.0) {
        return bad(format!("{name} must be finite and > 0, got {x}"));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.output.stem.is_empty() || self.output.stem.contains(['/', '\\']) {
            return bad(format!("invalid output name {:?}", self.output.stem));
        }
        match &self.command {
            CommandConfig::Spectrum { n, gamma, k, solver, tol, maxiter, eta, radius, .. } => {
                let dense = *solver == SpectrumSolver::Dense || (*solver == SpectrumSolver::Auto && *n <= 10);
                check_n(*n, dense)?;
                check_nonneg("gamma", *gamma)?;
                check_positive("tol", *tol)?;
                check_nonneg("eta", *eta)?;
                check_positive("radius", *radius)?;
                if *maxiter == 0 {
                    return bad("maxiter must be >= 1");
                }
                if *k == 0 || *k > 1 << n {
                    return bad(format!("k = {k} outside 1..=2^N"));
                }
            }
            CommandConfig::Green { n, k, energy } => {
                check_n(*n, false)?;
                if k > n {
                    return bad(format!("ball radius {k} exceeds N = {n}"));
                }
                if !energy.is_finite() {
                    return bad("energy must be finite");
                }
            }
            CommandConfig::Thermo { n, beta, gamma, seeds, method, samples, levels } => {
                check_n(n.hi, *method == ThermoMethod::Dense)?;
                check_n(n.lo, false)?;
                check_nonneg("beta", *beta)?;
                check_nonneg("gamma", *gamma)?;
                check_seeds(seeds)?;
                if *samples == 0 || *levels == 0 {
                    return bad("samples and levels must be >= 1");
                }
                if qrem::predictions::free_energy_correction(*beta, *gamma).is_err() {
                    return bad(format!("no correction prediction at beta = {beta}, gamma = {gamma} (critical line)"));
                }
            }
            CommandConfig::Ensemble { n, gamma, seeds, .. } => {
                check_n(*n, false)?;
                check_nonneg("gamma", *gamma)?;
                if *gamma >= qrem::predictions::beta_c() {
                    return bad(format!("ensemble needs gamma < beta_c, got {gamma}"));
                }
                check_seeds(seeds)?;
            }
            CommandConfig::Phase { beta, gamma } => {
                if beta.is_empty() || gamma.is_empty() {
                    return bad("phase needs at least one beta and one gamma");
                }
                for b in beta {
                    check_nonneg("beta", *b)?;
                }
                for g in gamma {
                    check_nonneg("gamma", *g)?;
                }
            }
            CommandConfig::Gap { n, gamma_lo, gamma_hi, points, tol, solver, .. } => {
                check_n(*n, *solver == GapSolver::Dense)?;
                check_nonneg("gamma_lo", *gamma_lo)?;
                check_positive("tol", *tol)?;
                if !(gamma_hi > gamma_lo) || *gamma_hi > 3.0 * qrem::predictions::beta_c() {
                    return bad(format!("need gamma_lo < gamma_hi <= 3 beta_c, got [{gamma_lo}, {gamma_hi}]"));
                }
                if *points < 3 {
                    return bad("gap sweep needs >= 3 points");
                }
            }
            CommandConfig::Rw { n, alpha, w_size, t, trials, .. } => {
                check_n(*n, false)?;
                check_positive("alpha", *alpha)?;
                check_positive("t", *t)?;
                if let Some(w) = w_size {
                    if *w >= 1 << n {
                        return bad(format!("|W| = {w} must be below 2^N"));
                    }
                    if *trials == 0 {
                        return bad("trials must be >= 1");
                    }
                }
            }
            CommandConfig::Deephole { n, seeds, epsilon, delta, alpha, .. } => {
                check_n(*n, false)?;
                check_seeds(seeds)?;
                check_positive("epsilon", *epsilon)?;
                check_positive("delta", *delta)?;
                if !(*alpha > 0.0 && *alpha < 0.5) {
                    return bad(format!("alpha must lie in (0, 1/2), got {alpha}"));
                }
            }
        }
        Ok(())
    }
}
