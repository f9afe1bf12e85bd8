//! Experiment configuration, execution, and trace I/O.

mod csv;
mod estimators;

pub use csv::{emit_csv, parse_trace_csv, CsvError, CSV_HEADER};
pub use estimators::{estimate_delta, estimate_rate, DeltaEstimate, EstimateError, GAP_FLOOR};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::problems::{Dataset, LogisticProblem, NllsProblem, Objective, ParseError, QuadraticProblem};
use crate::solvers::{
    solve_instrumented, Clock, NoopMonitor, SolverConfig, StepMonitor, Trace, WallClock,
};

/// Decouples the dataset stream from the operator-schedule stream (which
/// uses the seed directly) and the sketch stream.
const DATA_SEED_SALT: u64 = 0x5a5a_0001;
/// Decouples the initial-point stream from everything else.
const X0_SEED_SALT: u64 = 0xa5a5_0002;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Logistic,
    Nlls,
    Quadratic,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Logistic => "logistic",
            ProblemKind::Nlls => "nlls",
            ProblemKind::Quadratic => "quadratic",
        }
    }

    pub fn parse(s: &str) -> Option<ProblemKind> {
        Some(match s {
            "logistic" => ProblemKind::Logistic,
            "nlls" => ProblemKind::Nlls,
            "quadratic" => ProblemKind::Quadratic,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    /// LIBSVM-format file on disk.
    File(PathBuf),
    /// Generated instance: feature count and row count.
    Synthetic { n_features: usize, rows: usize },
}

impl DataSource {
    /// Accepts either a path or the form `synthetic:<N>x<M>`.
    pub fn parse(s: &str) -> Result<DataSource, String> {
        if let Some(dims) = s.strip_prefix("synthetic:") {
            let (n, m) = dims
                .split_once('x')
                .ok_or_else(|| format!("expected synthetic:<N>x<M>, got {s:?}"))?;
            let n_features: usize =
                n.parse().map_err(|_| format!("bad feature count {n:?}"))?;
            let rows: usize = m.parse().map_err(|_| format!("bad row count {m:?}"))?;
            if n_features == 0 || rows == 0 {
                return Err("synthetic dimensions must be positive".into());
            }
            Ok(DataSource::Synthetic { n_features, rows })
        } else {
            Ok(DataSource::File(PathBuf::from(s)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum X0Mode {
    Zero,
    /// Coordinatewise uniform on [0, 1] from the salted seed stream.
    Uniform01,
}

impl X0Mode {
    pub fn name(self) -> &'static str {
        match self {
            X0Mode::Zero => "zero",
            X0Mode::Uniform01 => "uniform01",
        }
    }

    pub fn parse(s: &str) -> Option<X0Mode> {
        Some(match s {
            "zero" => X0Mode::Zero,
            "uniform01" => X0Mode::Uniform01,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub data: DataSource,
    /// Ridge weight for the logistic problem; ignored elsewhere.
    pub lambda: f64,
    pub x0_mode: X0Mode,
    pub solver: SolverConfig,
    /// Trace destination; `None` leaves writing to the caller.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("invalid experiment: {0}")]
    Config(String),
}

/// Materializes the objective described by the config.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Box<dyn Objective>, HarnessError> {
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed ^ DATA_SEED_SALT);
    match cfg.problem {
        ProblemKind::Quadratic => match &cfg.data {
            DataSource::Synthetic { n_features, .. } => {
                Ok(Box::new(QuadraticProblem::synthetic(*n_features, &mut data_rng)))
            }
            DataSource::File(path) => Err(HarnessError::Config(format!(
                "quadratic instances are synthetic only, got file {}",
                path.display()
            ))),
        },
        ProblemKind::Logistic | ProblemKind::Nlls => {
            let dataset = load_dataset(&cfg.data, &mut data_rng)?;
            if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
                return Err(HarnessError::Config(format!(
                    "lambda must be nonnegative, got {}",
                    cfg.lambda
                )));
            }
            Ok(match cfg.problem {
                ProblemKind::Logistic => Box::new(LogisticProblem::new(dataset, cfg.lambda)),
                _ => Box::new(NllsProblem::new(dataset)),
            })
        }
    }
}

fn load_dataset(source: &DataSource, rng: &mut ChaCha8Rng) -> Result<Dataset, HarnessError> {
    match source {
        DataSource::File(path) => Ok(crate::problems::parse_libsvm_file(path, None)?),
        DataSource::Synthetic { n_features, rows } => {
            if *n_features == 0 || *rows == 0 {
                return Err(HarnessError::Config("synthetic dimensions must be positive".into()));
            }
            Ok(Dataset::synthetic(*n_features, *rows, rng))
        }
    }
}

/// Initial point per the configured mode, from its own seed stream.
pub fn initial_point(cfg: &ExperimentConfig, dim: usize) -> DVector<f64> {
    match cfg.x0_mode {
        X0Mode::Zero => DVector::zeros(dim),
        X0Mode::Uniform01 => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed ^ X0_SEED_SALT);
            DVector::from_fn(dim, |_, _| rng.gen_range(0.0..1.0))
        }
    }
}

/// Builds the problem and runs the configured solver to completion.
pub fn run(cfg: &ExperimentConfig) -> Result<Trace, HarnessError> {
    run_instrumented(cfg, &mut NoopMonitor, &mut WallClock::new())
}

/// [`run`] with monitor and clock injection.
pub fn run_instrumented(
    cfg: &ExperimentConfig,
    monitor: &mut dyn StepMonitor,
    clock: &mut dyn Clock,
) -> Result<Trace, HarnessError> {
    let problem = build_problem(cfg)?;
    let x0 = initial_point(cfg, problem.dim());
    Ok(solve_instrumented(problem.as_ref(), &cfg.solver, &x0, monitor, clock))
}

/// Reads a flat `key = value` manifest: one pair per line, `#` comments
/// and blank lines ignored. Later keys override earlier ones.
pub fn load_key_values(path: &Path) -> Result<BTreeMap<String, String>, HarnessError> {
    let file = File::open(path)?;
    let mut map = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let (key, value) = text.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("line {}: expected key=value, got {text:?}", idx + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}
