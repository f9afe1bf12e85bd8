//! Benchmark harness CLI: configure a run, emit its CSV trace, and post-
//! process traces into rate and admissibility estimates.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mlnewton::harness::{
    build_problem, emit_csv, estimate_delta, estimate_rate, initial_point, load_key_values,
    parse_trace_csv, DataSource, ExperimentConfig, ProblemKind, X0Mode,
};
use mlnewton::solvers::{solve, Method, ScheduleMode, SolverConfig};
use mlnewton::transfer::TransferOperator;

#[derive(Parser)]
#[command(
    name = "mlnewton",
    version,
    about = "Multilevel regularized Newton benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace as CSV.
    Run(Box<RunArgs>),
    /// Fit the empirical convergence exponent of a trace against a
    /// reference optimum.
    Rate(RateArgs),
    /// Estimate how often random coarse operators pass the admissibility
    /// gate.
    Delta(DeltaArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value manifest mirroring these flags; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Objective family: logistic, nlls, or quadratic [default: logistic].
    #[arg(long)]
    problem: Option<String>,
    /// LIBSVM path or synthetic:<N>x<M> [default: synthetic:200x1000].
    #[arg(long)]
    data: Option<String>,
    /// ml-nonconvex-scen1|ml-nonconvex-scen2|ml-nonconvex-scen3|
    /// ml-convex|gd-armijo|cubic-newton [default: ml-convex].
    #[arg(long)]
    method: Option<String>,
    /// Coarse dimension as a fraction of N; 1.0 pins the full-space
    /// operator [default: 0.5].
    #[arg(long)]
    n_frac: Option<f64>,
    /// Rank of the randomized low-rank surrogate [default: 10].
    #[arg(long)]
    rank: Option<usize>,
    /// Admissibility gate fraction in (0, 1) [default: 0.1].
    #[arg(long)]
    mu: Option<f64>,
    /// Admissibility gate floor on ||R grad|| [default: 1e-9].
    #[arg(long)]
    eps: Option<f64>,
    /// Initial and floor Lipschitz-style estimate [default: 1e-12].
    #[arg(long)]
    l0: Option<f64>,
    /// Initial and floor deviation estimate [default: 1e-12].
    #[arg(long)]
    s0: Option<f64>,
    /// Ridge weight for the logistic objective [default: 1e-3].
    #[arg(long)]
    lambda: Option<f64>,
    /// Gradient-norm stopping tolerance [default: 1e-5].
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Iteration budget [default: 1000].
    #[arg(long)]
    max_iters: Option<usize>,
    /// Wall-clock budget in seconds [default: unlimited].
    #[arg(long)]
    max_seconds: Option<f64>,
    /// Base seed for data, initial point, schedule, and sketches
    /// [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Initial point: zero or uniform01 [default: uniform01 for
    /// logistic, zero otherwise].
    #[arg(long)]
    x0: Option<String>,
    /// Trace destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RateArgs {
    /// Trace CSV to fit.
    #[arg(long)]
    trace: PathBuf,
    /// Reference trace CSV; its smallest f serves as f*.
    #[arg(long)]
    ref_trace: PathBuf,
    /// First iteration included in the fit [default: 20].
    #[arg(long)]
    k_min: Option<usize>,
}

#[derive(Args)]
struct DeltaArgs {
    /// LIBSVM path or synthetic:<N>x<M> [default: synthetic:200x1000].
    /// The gate is probed on a logistic instance over this data.
    #[arg(long)]
    data: Option<String>,
    /// Coarse dimension as a fraction of N [default: 0.5].
    #[arg(long)]
    n_frac: Option<f64>,
    /// Gate fraction to test [default: 0.1].
    #[arg(long)]
    mu_hat: Option<f64>,
    /// Operator draws per sample point; 10 points are probed
    /// [default: 1000].
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(*args),
        Command::Rate(args) => cmd_rate(args),
        Command::Delta(args) => cmd_delta(args),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Looks a typed value up in the manifest when the flag was not given.
fn file_value<T: FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, String> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| format!("config key {key}: cannot parse {raw:?}")),
    }
}

fn merge<T: FromStr>(
    flag: Option<T>,
    map: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, String> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => file_value(map, key),
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, String> {
    let manifest = match &args.config {
        Some(path) => load_key_values(path).map_err(|e| e.to_string())?,
        None => BTreeMap::new(),
    };
    let known_keys = [
        "problem", "data", "method", "n-frac", "rank", "mu", "eps", "l0", "s0", "lambda",
        "grad-tol", "max-iters", "max-seconds", "seed", "x0", "out",
    ];
    if let Some(unknown) = manifest.keys().find(|k| !known_keys.contains(&k.as_str())) {
        return Err(format!("config key {unknown:?} is not a recognized flag"));
    }

    let problem_name: String =
        merge(args.problem, &manifest, "problem")?.unwrap_or_else(|| "logistic".into());
    let problem_kind = ProblemKind::parse(&problem_name)
        .ok_or_else(|| format!("unknown problem {problem_name:?}"))?;
    let data_text: String =
        merge(args.data, &manifest, "data")?.unwrap_or_else(|| "synthetic:200x1000".into());
    let data = DataSource::parse(&data_text)?;
    let method_name: String =
        merge(args.method, &manifest, "method")?.unwrap_or_else(|| "ml-convex".into());
    let method =
        Method::parse(&method_name).ok_or_else(|| format!("unknown method {method_name:?}"))?;
    let n_frac = merge(args.n_frac, &manifest, "n-frac")?.unwrap_or(0.5);
    if !(n_frac > 0.0 && n_frac <= 1.0) {
        return Err(format!("n-frac must lie in (0, 1], got {n_frac}"));
    }
    let x0_name: String = merge(args.x0, &manifest, "x0")?.unwrap_or_else(|| {
        match problem_kind {
            ProblemKind::Logistic => "uniform01".into(),
            _ => "zero".into(),
        }
    });
    let x0_mode =
        X0Mode::parse(&x0_name).ok_or_else(|| format!("unknown x0 mode {x0_name:?}"))?;

    let solver = SolverConfig {
        method,
        rank: merge(args.rank, &manifest, "rank")?.unwrap_or(10),
        mu: merge(args.mu, &manifest, "mu")?.unwrap_or(0.1),
        eps_condition: merge(args.eps, &manifest, "eps")?.unwrap_or(1e-9),
        l0: merge(args.l0, &manifest, "l0")?.unwrap_or(1e-12),
        s0: merge(args.s0, &manifest, "s0")?.unwrap_or(1e-12),
        grad_tol: merge(args.grad_tol, &manifest, "grad-tol")?.unwrap_or(1e-5),
        max_iters: merge(args.max_iters, &manifest, "max-iters")?.unwrap_or(1000),
        max_seconds: merge(args.max_seconds, &manifest, "max-seconds")?
            .unwrap_or(f64::INFINITY),
        seed: merge(args.seed, &manifest, "seed")?.unwrap_or(0),
        ..SolverConfig::default()
    };

    let out: Option<PathBuf> = match args.out {
        Some(p) => Some(p),
        None => file_value::<String>(&manifest, "out")?.map(PathBuf::from),
    };
    let mut cfg = ExperimentConfig {
        problem: problem_kind,
        data,
        lambda: merge(args.lambda, &manifest, "lambda")?.unwrap_or(1e-3),
        x0_mode,
        solver,
        output: out,
    };

    let problem = build_problem(&cfg).map_err(|e| e.to_string())?;
    let dim = problem.dim();
    if method.is_multilevel() {
        let n = ((n_frac * dim as f64).round() as usize).clamp(1, dim);
        if n == dim {
            cfg.solver.schedule = ScheduleMode::Fixed(TransferOperator::identity(dim));
        }
        cfg.solver.coarse_dim = n;
    }

    let x0 = initial_point(&cfg, dim);
    let trace = solve(problem.as_ref(), &cfg.solver, &x0);

    match &cfg.output {
        Some(path) => {
            let mut file = File::create(path).map_err(|e| e.to_string())?;
            emit_csv(&trace, &mut file).map_err(|e| e.to_string())?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            emit_csv(&trace, &mut lock).map_err(|e| e.to_string())?;
        }
    }
    let last = trace.final_record();
    eprintln!(
        "stop={} steps={} f={} grad_norm={} seconds={}",
        trace.stop.as_str(),
        trace.steps(),
        last.f,
        last.grad_norm,
        trace.total_seconds,
    );
    if let mlnewton::solvers::StopReason::Error(msg) = &trace.stop {
        eprintln!("run error: {msg}");
    }
    Ok(ExitCode::from(trace.stop.exit_code() as u8))
}

fn cmd_rate(args: RateArgs) -> Result<ExitCode, String> {
    let records = parse_trace_csv(BufReader::new(
        File::open(&args.trace).map_err(|e| format!("{}: {e}", args.trace.display()))?,
    ))
    .map_err(|e| e.to_string())?;
    let reference = parse_trace_csv(BufReader::new(
        File::open(&args.ref_trace)
            .map_err(|e| format!("{}: {e}", args.ref_trace.display()))?,
    ))
    .map_err(|e| e.to_string())?;
    let f_star = reference
        .iter()
        .map(|r| r.f)
        .fold(f64::INFINITY, f64::min);
    if !f_star.is_finite() {
        return Err("reference trace has no finite objective values".into());
    }
    let slope = estimate_rate(&records, f_star, args.k_min.unwrap_or(20))
        .map_err(|e| e.to_string())?;
    println!("{slope}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_delta(args: DeltaArgs) -> Result<ExitCode, String> {
    let data_text = args.data.unwrap_or_else(|| "synthetic:200x1000".into());
    let data = DataSource::parse(&data_text)?;
    let n_frac = args.n_frac.unwrap_or(0.5);
    if !(n_frac > 0.0 && n_frac <= 1.0) {
        return Err(format!("n-frac must lie in (0, 1], got {n_frac}"));
    }
    let mu_hat = args.mu_hat.unwrap_or(0.1);
    let trials = args.trials.unwrap_or(1000);
    let seed = args.seed.unwrap_or(0);

    let cfg = ExperimentConfig {
        problem: ProblemKind::Logistic,
        data,
        lambda: 1e-3,
        x0_mode: X0Mode::Uniform01,
        solver: SolverConfig { seed, ..SolverConfig::default() },
        output: None,
    };
    let problem = build_problem(&cfg).map_err(|e| e.to_string())?;
    let dim = problem.dim();
    let n = ((n_frac * dim as f64).round() as usize).clamp(1, dim);

    // Probe points drawn like uniform01 initial iterates.
    let mut point_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0de1_7a00);
    let points: Vec<DVector<f64>> = (0..10)
        .map(|_| DVector::from_fn(dim, |_, _| point_rng.gen_range(0.0..1.0)))
        .collect();
    let mut draw_rng = ChaCha8Rng::seed_from_u64(seed);
    let est = estimate_delta(problem.as_ref(), &points, n, mu_hat, trials, &mut draw_rng);
    println!("{}", est.aggregate);
    eprintln!(
        "draws={} points={} per_point_min={}",
        est.draws,
        points.len(),
        est.per_point.iter().copied().fold(f64::INFINITY, f64::min),
    );
    Ok(ExitCode::SUCCESS)
}
