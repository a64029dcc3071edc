//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation or engine failure, 2 usage or
//! configuration error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use super::config::{Engine, ExperimentConfig};
use super::convergence::{csv_string, emit_csv, run_convergence};
use super::validate::{validate_law, ValidationConfig};
use crate::error::Error;
use crate::gpde::{gaussian_oracle, solve_diag_2d, solve_terminal, PdeGrid1D};
use crate::payoffs::{PayoffFn, PayoffKind};
use crate::strong_walk::{simulate_policy, strong_dp_value, StrongLaw};
use crate::weak_dp::{self, extract_optimal_law, BoundMode};

#[derive(Debug, Parser)]
#[command(name = "gexp", version, about = "Sublinear expectations under volatility uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Discrete-time weak value.
    PriceWeak(CommonArgs),
    /// Discrete-time strong value with a Monte Carlo check of its policy.
    PriceStrong(CommonArgs),
    /// Continuous-time reference from the G-heat equation.
    PricePde(CommonArgs),
    /// Convergence table over the n-schedule, written as CSV.
    Converge(CommonArgs),
    /// Pathwise and moment checks on the optimal laws.
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// Single step count, replacing the schedule.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sigma_grid_refinement: Option<u32>,
    #[arg(long)]
    paths: Option<usize>,
    /// Pointwise increment bounds: paper, relaxed or none.
    #[arg(long)]
    bound_mode: Option<BoundMode>,
    /// Fill the runtime column of the CSV.
    #[arg(long)]
    timings: bool,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io { .. } => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

/// Parses `argv` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

/// Loaded configuration with command-line overrides applied. The file's
/// `bound_mode` is kept separately: it names the law class that `validate`
/// checks against.
struct Loaded {
    cfg: ExperimentConfig,
    declared_bounds: BoundMode,
}

fn load(args: &CommonArgs) -> Result<Loaded, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    let declared_bounds = cfg.bound_mode;
    if let Some(n) = args.n {
        cfg.n_schedule = vec![n];
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(k) = args.sigma_grid_refinement {
        cfg.strong.refinement = k;
    }
    if let Some(p) = args.paths {
        cfg.paths = p;
    }
    if let Some(b) = args.bound_mode {
        cfg.bound_mode = b;
    }
    cfg.timings |= args.timings;
    cfg.validate()?;
    Ok(Loaded { cfg, declared_bounds })
}

fn last_n(cfg: &ExperimentConfig) -> usize {
    *cfg.n_schedule.last().expect("validated schedules are nonempty")
}

fn run(command: Command) -> Result<i32, Failure> {
    match command {
        Command::PriceWeak(a) => price_weak(&load(&a)?.cfg),
        Command::PriceStrong(a) => price_strong(&load(&a)?.cfg),
        Command::PricePde(a) => price_pde(&load(&a)?.cfg),
        Command::Converge(a) => converge(&load(&a)?.cfg),
        Command::Validate(a) => validate(&load(&a)?),
    }
}

fn price_weak(cfg: &ExperimentConfig) -> Result<i32, Failure> {
    let set = cfg.uncertainty_set()?;
    let payoff = cfg.payoff()?;
    for &n in &cfg.n_schedule {
        let res = weak_dp::evaluate(&payoff, &set, n, cfg.horizon, &cfg.weak_config(false))?;
        println!("{}", serde_json::to_string(&res.record).expect("records serialize"));
    }
    Ok(0)
}

fn price_strong(cfg: &ExperimentConfig) -> Result<i32, Failure> {
    let set = cfg.uncertainty_set()?;
    let payoff = cfg.payoff()?;
    for &n in &cfg.n_schedule {
        let strong = strong_dp_value(&payoff, &set, n, cfg.horizon, &cfg.strong_config(true))?;
        let weak = weak_dp::evaluate(&payoff, &set, n, cfg.horizon, &cfg.weak_config(false))?;
        let law = StrongLaw::new(strong.policy.clone().expect("policy was stored"), n, cfg.horizon)?;
        let stats = simulate_policy(&law, &payoff, cfg.paths, cfg.seed)?;
        let record = json!({
            "n": n,
            "strong_value": strong.value,
            "weak_value": weak.value,
            "gap": weak.value - strong.value,
            "mc_mean": stats.payoff.mean,
            "mc_stderr": stats.payoff.std_error(),
            "seed": cfg.seed,
        });
        println!("{record}");
    }
    Ok(0)
}

/// Gaussian value that the G-heat equation reduces to: exact when `r = R`,
/// and for convex (concave) data with volatility `sqrt(R)` (`sqrt(r)`).
fn pde_oracle(f: &PayoffFn, r: f64, big_r: f64, horizon: f64) -> Option<f64> {
    let sigma2 = if r == big_r {
        big_r
    } else {
        match f {
            PayoffFn::Square
            | PayoffFn::Abs
            | PayoffFn::Identity
            | PayoffFn::Call { .. }
            | PayoffFn::Put { .. }
            | PayoffFn::Constant(_) => big_r,
            PayoffFn::NegSquare => r,
            PayoffFn::Combination(_) => return None,
        }
    };
    gaussian_oracle(f, sigma2.sqrt(), horizon).ok()
}

fn price_pde(cfg: &ExperimentConfig) -> Result<i32, Failure> {
    let set = cfg.uncertainty_set()?;
    let payoff = cfg.payoff()?;
    if payoff.kind() != PayoffKind::Terminal {
        return Err(Failure::Config("the PDE engine needs a terminal payoff".into()));
    }
    let f = payoff.function();
    let record = match payoff.dim() {
        1 => {
            let grid = PdeGrid1D::auto(&set, cfg.horizon, cfg.pde.points_per_sd)?;
            let value = solve_terminal(f, &set, &grid)?.value_at_origin;
            let (r, big_r) = set.spectrum_bounds();
            let oracle = pde_oracle(f, r, big_r, cfg.horizon);
            json!({
                "payoff": cfg.payoff,
                "D": cfg.uncertainty,
                "T": cfg.horizon,
                "h": grid.h,
                "dt": grid.dt(),
                "value": value,
                "oracle": oracle,
                "abs_err": oracle.map(|o| (value - o).abs()),
            })
        }
        2 => {
            let value = solve_diag_2d(f, &set, cfg.horizon, None)?;
            json!({
                "payoff": cfg.payoff,
                "D": cfg.uncertainty,
                "T": cfg.horizon,
                "value": value,
            })
        }
        d => return Err(Failure::Run(format!("no PDE engine for d = {d}"))),
    };
    println!("{record}");
    Ok(0)
}

fn converge(cfg: &ExperimentConfig) -> Result<i32, Failure> {
    let report = run_convergence(cfg)?;
    match &cfg.out {
        Some(path) => {
            emit_csv(&report, path)?;
            let summary = json!({
                "out": path.display().to_string(),
                "rows": report.rows.len(),
                "sandwich_violations": report.sandwich_violations(1e-9),
                "errors": report.rows.iter().filter_map(|r| r.error.clone()).collect::<Vec<_>>(),
                "config_hash": report.metadata.config_hash,
            });
            println!("{summary}");
        }
        None => print!("{}", csv_string(&report)),
    }
    Ok(if report.has_errors() { 1 } else { 0 })
}

fn validate(loaded: &Loaded) -> Result<i32, Failure> {
    let cfg = &loaded.cfg;
    let set = cfg.uncertainty_set()?;
    let payoff = cfg.payoff()?;
    let n = last_n(cfg);
    let vcfg = ValidationConfig {
        paths: cfg.paths,
        pairs: 10,
        seed: cfg.seed,
        bound_mode: loaded.declared_bounds,
    };
    let mut all_passed = true;
    if cfg.runs(Engine::Weak) {
        let res = weak_dp::evaluate(&payoff, &set, n, cfg.horizon, &cfg.weak_config(true))?;
        let law = extract_optimal_law(&res)?;
        let report = validate_law(&law, &set, &vcfg)?;
        all_passed &= report.passed();
        println!("{}", json!({"law": "weak", "n": n, "passed": report.passed(), "report": report}));
    }
    if cfg.runs(Engine::Strong) {
        let res = strong_dp_value(&payoff, &set, n, cfg.horizon, &cfg.strong_config(true))?;
        let law = StrongLaw::new(res.policy.expect("policy was stored"), n, cfg.horizon)?;
        let report = validate_law(&law, &set, &vcfg)?;
        all_passed &= report.passed();
        println!("{}", json!({"law": "strong", "n": n, "passed": report.passed(), "report": report}));
    }
    Ok(if all_passed { 0 } else { 1 })
}
