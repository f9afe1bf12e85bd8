//! Solver driver and configuration.
//!
//! One driver runs six methods behind a single config: four multilevel
//! regularized Newton variants (three nonconvex Hessian surrogates plus a
//! convex exact-reduced-Hessian one), gradient descent with Armijo
//! backtracking, and a cubic-regularized Newton baseline. Every accepted
//! step appends one [`StepRecord`] to the returned [`Trace`]; step failures
//! end the run with an error stop reason instead of propagating.

mod cubic;
mod gd;
mod line_search;
mod multilevel;

pub use cubic::solve_cubic_subproblem;
pub use line_search::{compute_alpha, DescentRule, LineSearchMode};
pub use multilevel::coarse_direction;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::hessian::{HessianSurrogate, SurrogateError};
use crate::problems::Objective;
use crate::transfer::{OperatorSchedule, TransferError, TransferOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MlNonconvexScen1,
    MlNonconvexScen2,
    MlNonconvexScen3,
    MlConvex,
    GdArmijo,
    CubicNewton,
}

impl Method {
    pub fn is_multilevel(self) -> bool {
        !matches!(self, Method::GdArmijo | Method::CubicNewton)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::MlNonconvexScen1 => "ml-nonconvex-scen1",
            Method::MlNonconvexScen2 => "ml-nonconvex-scen2",
            Method::MlNonconvexScen3 => "ml-nonconvex-scen3",
            Method::MlConvex => "ml-convex",
            Method::GdArmijo => "gd-armijo",
            Method::CubicNewton => "cubic-newton",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Some(match s {
            "ml-nonconvex-scen1" => Method::MlNonconvexScen1,
            "ml-nonconvex-scen2" => Method::MlNonconvexScen2,
            "ml-nonconvex-scen3" => Method::MlNonconvexScen3,
            "ml-convex" => Method::MlConvex,
            "gd-armijo" => Method::GdArmijo,
            "cubic-newton" => Method::CubicNewton,
            _ => return None,
        })
    }
}

/// Where each iteration's transfer operator comes from.
#[derive(Debug, Clone)]
pub enum ScheduleMode {
    /// Fresh uniform index draw every iteration.
    Resample,
    /// Explicit index sets visited in order, wrapping.
    Cyclic(Vec<Vec<usize>>),
    /// One operator for the whole run.
    Fixed(TransferOperator),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub method: Method,
    /// Coarse dimension `n` for multilevel methods.
    pub coarse_dim: usize,
    /// Target rank for the randomized low-rank surrogate.
    pub rank: usize,
    /// Coarse-step gate fraction, strictly between 0 and 1.
    pub mu: f64,
    /// Coarse-step gate floor on the restricted gradient norm.
    pub eps_condition: f64,
    /// Initial and floor value of the Lipschitz-style estimate.
    pub l0: f64,
    /// Initial and floor value of the surrogate-deviation estimate.
    pub s0: f64,
    /// Operator-norm bound used in the shift formula; sampled operators
    /// have norm exactly 1 and leave this at its default.
    pub omega: f64,
    /// Acceptance rule override; `None` picks a default from the method and
    /// schedule.
    pub descent_rule: Option<DescentRule>,
    pub line_search: LineSearchMode,
    pub schedule: ScheduleMode,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub max_seconds: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::MlConvex,
            coarse_dim: 0,
            rank: 10,
            mu: 0.1,
            eps_condition: 1e-9,
            l0: 1e-12,
            s0: 1e-12,
            omega: 1.0,
            descent_rule: None,
            line_search: LineSearchMode::Doubling,
            schedule: ScheduleMode::Resample,
            grad_tol: 1e-5,
            max_iters: 1000,
            max_seconds: f64::INFINITY,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, fine_dim: usize) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::Config(msg));
        if fine_dim == 0 {
            return bad("problem dimension is zero".into());
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad(format!("mu must lie in (0, 1), got {}", self.mu));
        }
        if !(self.eps_condition >= 0.0) {
            return bad(format!("eps_condition must be >= 0, got {}", self.eps_condition));
        }
        if !(self.l0 > 0.0 && self.l0.is_finite()) {
            return bad(format!("l0 must be positive and finite, got {}", self.l0));
        }
        if !(self.s0 >= 0.0 && self.s0.is_finite()) {
            return bad(format!("s0 must be nonnegative and finite, got {}", self.s0));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad(format!("omega must be positive, got {}", self.omega));
        }
        if !(self.grad_tol > 0.0) {
            return bad(format!("grad_tol must be positive, got {}", self.grad_tol));
        }
        if !(self.max_seconds >= 0.0) {
            return bad(format!("max_seconds must be >= 0, got {}", self.max_seconds));
        }
        if self.method.is_multilevel() {
            match &self.schedule {
                ScheduleMode::Resample => {
                    if self.coarse_dim == 0 || self.coarse_dim >= fine_dim {
                        return bad(format!(
                            "coarse_dim must satisfy 1 <= n < {fine_dim} for resampling, got {}",
                            self.coarse_dim
                        ));
                    }
                }
                ScheduleMode::Cyclic(sets) => {
                    if sets.is_empty() {
                        return bad("cyclic schedule needs at least one index set".into());
                    }
                    for set in sets {
                        TransferOperator::from_indices(set.clone(), fine_dim)
                            .map_err(|e| SolverError::Config(e.to_string()))?;
                    }
                }
                ScheduleMode::Fixed(op) => {
                    if op.fine_dim() != fine_dim {
                        return bad(format!(
                            "fixed operator has fine dimension {}, problem has {fine_dim}",
                            op.fine_dim()
                        ));
                    }
                }
            }
            if self.method == Method::MlNonconvexScen2 {
                let n = self.effective_coarse_dim(fine_dim);
                if self.rank == 0 || self.rank > n {
                    return bad(format!(
                        "rank must satisfy 1 <= r <= {n}, got {}",
                        self.rank
                    ));
                }
            }
        }
        Ok(())
    }

    fn effective_coarse_dim(&self, fine_dim: usize) -> usize {
        match &self.schedule {
            ScheduleMode::Resample => self.coarse_dim,
            ScheduleMode::Cyclic(sets) => sets.iter().map(Vec::len).min().unwrap_or(fine_dim),
            ScheduleMode::Fixed(op) => op.coarse_dim(),
        }
    }

    /// Defaults: randomized runs use the step-norm rules (with the stronger
    /// two-thirds constant in the convex case); deterministic schedules use
    /// the decrement rule.
    pub fn effective_descent_rule(&self) -> DescentRule {
        if let Some(rule) = self.descent_rule {
            return rule;
        }
        match (&self.schedule, self.method) {
            (ScheduleMode::Resample, Method::MlConvex) => DescentRule::TwoThirdsAlphaRSquared,
            (ScheduleMode::Resample, _) => DescentRule::AlphaRSquared,
            _ => DescentRule::LambdaHalf,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line search exhausted {0} doublings without an acceptable step")]
    LineSearchFailed(u32),
    #[error("cubic subproblem failed to bracket a radius")]
    CubicBracket,
    #[error("objective or gradient became non-finite")]
    NonFinite,
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Coarse,
    Fine,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Coarse => "coarse",
            Level::Fine => "fine",
        }
    }

    pub fn parse(s: &str) -> Option<Level> {
        match s {
            "coarse" => Some(Level::Coarse),
            "fine" => Some(Level::Fine),
            _ => None,
        }
    }
}

/// One row of a run trace. Row `k = 0` is the initial point; row `k >= 1`
/// describes the step that produced iterate `k`: `f` and `grad_norm` are
/// evaluated at the new iterate, while `reduced_grad_norm`, `alpha`,
/// `lambda_hat_sq`, `step_norm`, `level`, and `inner_loops` belong to the
/// transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub reduced_grad_norm: f64,
    pub alpha: f64,
    pub lambda_hat_sq: f64,
    pub step_norm: f64,
    pub level: Level,
    pub inner_loops: u32,
    pub elapsed_s: f64,
}

/// Per-step diagnostics that do not fit the fixed CSV schema. Entry `j`
/// corresponds to record `j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAudit {
    /// The step's own operator applied to the *new* gradient.
    pub post_reduced_grad_norm: f64,
    /// Lipschitz-style estimate after the accepted update.
    pub accepted_l: f64,
    /// Deviation estimate after the accepted update.
    pub accepted_s: f64,
    /// Norm of the coarse-space direction (equals `step_norm` for sampled
    /// operators; differs for dense ones).
    pub coarse_step_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Tolerance,
    IterationLimit,
    TimeLimit,
    Error(String),
}

impl StopReason {
    pub fn as_str(&self) -> &str {
        match self {
            StopReason::Tolerance => "tolerance",
            StopReason::IterationLimit => "iteration-limit",
            StopReason::TimeLimit => "time-limit",
            StopReason::Error(_) => "error",
        }
    }

    /// Process exit code contract: success on tolerance, 2 on budget
    /// exhaustion, 1 on error.
    pub fn exit_code(&self) -> i32 {
        match self {
            StopReason::Tolerance => 0,
            StopReason::IterationLimit | StopReason::TimeLimit => 2,
            StopReason::Error(_) => 1,
        }
    }
}

/// Echo of the config fields monitors and estimators need downstream.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub method: Method,
    pub mu: f64,
    pub omega: f64,
    pub l0: f64,
    pub s0: f64,
    pub descent_rule: DescentRule,
    pub grad_tol: f64,
    pub seed: u64,
    pub fine_dim: usize,
    pub coarse_dim: usize,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub meta: RunMeta,
    pub records: Vec<StepRecord>,
    pub audits: Vec<StepAudit>,
    pub stop: StopReason,
    pub total_seconds: f64,
}

impl Trace {
    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("trace always has the initial record")
    }

    /// Number of completed steps (records minus the initial row).
    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Smallest gradient norm seen up to and including iterate `k`.
    pub fn best_grad_norm_by(&self, k: usize) -> f64 {
        self.records
            .iter()
            .filter(|r| r.k <= k)
            .map(|r| r.grad_norm)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Elapsed-time source, injectable so tests can pin timing.
pub trait Clock {
    fn elapsed_s(&mut self) -> f64;
}

pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        WallClock { start: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn elapsed_s(&mut self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Deterministic clock: advances a fixed amount per query.
pub struct ManualClock {
    pub per_query: f64,
    queries: u64,
}

impl ManualClock {
    pub fn new(per_query: f64) -> Self {
        ManualClock { per_query, queries: 0 }
    }
}

impl Clock for ManualClock {
    fn elapsed_s(&mut self) -> f64 {
        self.queries += 1;
        self.queries as f64 * self.per_query
    }
}

/// Everything a per-step monitor can inspect. Borrowed views into the
/// transition from `x_prev` to `x_next`; coarse-step fields are `None` on
/// fine-level and baseline steps.
pub struct StepContext<'a> {
    pub k: usize,
    pub level: Level,
    pub x_prev: &'a DVector<f64>,
    pub x_next: &'a DVector<f64>,
    pub grad_prev: &'a DVector<f64>,
    pub grad_next: &'a DVector<f64>,
    pub f_prev: f64,
    pub f_next: f64,
    pub alpha: f64,
    pub lambda_hat_sq: f64,
    pub d_fine: &'a DVector<f64>,
    pub d_coarse: Option<&'a DVector<f64>>,
    pub operator: Option<&'a TransferOperator>,
    pub surrogate: Option<&'a HessianSurrogate>,
    /// The matrix the surrogate was built from: the reduced Hessian on
    /// coarse steps, the full Hessian on multilevel fine steps.
    pub hessian_ref: Option<&'a DMatrix<f64>>,
}

pub trait StepMonitor {
    fn on_step(&mut self, problem: &dyn Objective, ctx: &StepContext<'_>);
}

pub struct NoopMonitor;

impl StepMonitor for NoopMonitor {
    fn on_step(&mut self, _problem: &dyn Objective, _ctx: &StepContext<'_>) {}
}

pub(crate) struct SolverState {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub l: f64,
    pub s: f64,
    pub schedule: OperatorSchedule,
    pub sketch_rng: ChaCha8Rng,
}

/// Output of one accepted step, before the driver commits it.
pub(crate) struct StepOutcome {
    pub x_next: DVector<f64>,
    pub f_next: f64,
    pub grad_next: DVector<f64>,
    pub reduced_grad_norm: f64,
    pub alpha: f64,
    pub lambda_hat_sq: f64,
    pub step_norm: f64,
    pub level: Level,
    pub inner_loops: u32,
    pub l_next: f64,
    pub s_next: f64,
    pub post_reduced_grad_norm: f64,
    pub coarse_step_norm: f64,
    pub d_fine: DVector<f64>,
    pub d_coarse: Option<DVector<f64>>,
    pub operator: Option<TransferOperator>,
    pub surrogate: Option<HessianSurrogate>,
    pub hessian_ref: Option<DMatrix<f64>>,
}

/// Runs the configured method from `x0` until the gradient tolerance, the
/// iteration budget, or the time budget is hit. Step-level failures stop
/// the run and are recorded in the trace rather than raised.
pub fn solve(problem: &dyn Objective, cfg: &SolverConfig, x0: &DVector<f64>) -> Trace {
    solve_instrumented(problem, cfg, x0, &mut NoopMonitor, &mut WallClock::new())
}

pub fn solve_instrumented(
    problem: &dyn Objective,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
    monitor: &mut dyn StepMonitor,
    clock: &mut dyn Clock,
) -> Trace {
    let meta = RunMeta {
        method: cfg.method,
        mu: cfg.mu,
        omega: cfg.omega,
        l0: cfg.l0,
        s0: cfg.s0,
        descent_rule: cfg.effective_descent_rule(),
        grad_tol: cfg.grad_tol,
        seed: cfg.seed,
        fine_dim: problem.dim(),
        coarse_dim: cfg.effective_coarse_dim(problem.dim()),
    };
    let error_trace = |msg: String, clock: &mut dyn Clock| Trace {
        meta: meta.clone(),
        records: Vec::new(),
        audits: Vec::new(),
        stop: StopReason::Error(msg),
        total_seconds: clock.elapsed_s(),
    };
    if let Err(e) = cfg.validate(problem.dim()) {
        return error_trace(e.to_string(), clock);
    }
    if x0.len() != problem.dim() {
        return error_trace(
            format!("x0 has dimension {}, problem has {}", x0.len(), problem.dim()),
            clock,
        );
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return error_trace("x0 contains non-finite entries".into(), clock);
    }

    let schedule = match &cfg.schedule {
        ScheduleMode::Resample => OperatorSchedule::resample(
            cfg.coarse_dim,
            ChaCha8Rng::seed_from_u64(cfg.seed),
        ),
        ScheduleMode::Cyclic(sets) => match OperatorSchedule::cyclic(sets.clone()) {
            Ok(s) => s,
            Err(e) => return error_trace(e.to_string(), clock),
        },
        ScheduleMode::Fixed(op) => OperatorSchedule::Fixed(op.clone()),
    };
    // The convex variant pins the deviation estimate at zero: its surrogate
    // is the reduced Hessian itself.
    let s_init = if cfg.method == Method::MlConvex { 0.0 } else { cfg.s0 };
    let mut state = SolverState {
        x: x0.clone(),
        f: problem.value(x0),
        grad: problem.gradient(x0),
        l: cfg.l0,
        s: s_init,
        schedule,
        sketch_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15),
    };

    let mut records = Vec::with_capacity(cfg.max_iters.min(4096) + 1);
    let mut audits = Vec::with_capacity(cfg.max_iters.min(4096));
    records.push(StepRecord {
        k: 0,
        f: state.f,
        grad_norm: state.grad.norm(),
        reduced_grad_norm: 0.0,
        alpha: 0.0,
        lambda_hat_sq: 0.0,
        step_norm: 0.0,
        level: Level::Fine,
        inner_loops: 0,
        elapsed_s: clock.elapsed_s(),
    });

    let stop;
    let mut k = 0usize;
    loop {
        if !state.f.is_finite() {
            stop = StopReason::Error(SolverError::NonFinite.to_string());
            break;
        }
        if state.grad.norm() <= cfg.grad_tol {
            stop = StopReason::Tolerance;
            break;
        }
        if k >= cfg.max_iters {
            stop = StopReason::IterationLimit;
            break;
        }
        if clock.elapsed_s() > cfg.max_seconds {
            stop = StopReason::TimeLimit;
            break;
        }
        let outcome = match cfg.method {
            Method::GdArmijo => gd::gd_armijo_step(problem, &state),
            Method::CubicNewton => cubic::cubic_newton_step(problem, cfg, &state),
            _ => multilevel::multilevel_step(problem, cfg, &mut state),
        };
        match outcome {
            Ok(out) => {
                k += 1;
                let ctx = StepContext {
                    k,
                    level: out.level,
                    x_prev: &state.x,
                    x_next: &out.x_next,
                    grad_prev: &state.grad,
                    grad_next: &out.grad_next,
                    f_prev: state.f,
                    f_next: out.f_next,
                    alpha: out.alpha,
                    lambda_hat_sq: out.lambda_hat_sq,
                    d_fine: &out.d_fine,
                    d_coarse: out.d_coarse.as_ref(),
                    operator: out.operator.as_ref(),
                    surrogate: out.surrogate.as_ref(),
                    hessian_ref: out.hessian_ref.as_ref(),
                };
                monitor.on_step(problem, &ctx);
                records.push(StepRecord {
                    k,
                    f: out.f_next,
                    grad_norm: out.grad_next.norm(),
                    reduced_grad_norm: out.reduced_grad_norm,
                    alpha: out.alpha,
                    lambda_hat_sq: out.lambda_hat_sq,
                    step_norm: out.step_norm,
                    level: out.level,
                    inner_loops: out.inner_loops,
                    elapsed_s: clock.elapsed_s(),
                });
                audits.push(StepAudit {
                    post_reduced_grad_norm: out.post_reduced_grad_norm,
                    accepted_l: out.l_next,
                    accepted_s: out.s_next,
                    coarse_step_norm: out.coarse_step_norm,
                });
                state.x = out.x_next;
                state.f = out.f_next;
                state.grad = out.grad_next;
                state.l = out.l_next;
                state.s = out.s_next;
            }
            Err(e) => {
                stop = StopReason::Error(e.to_string());
                break;
            }
        }
    }

    Trace {
        meta,
        records,
        audits,
        stop,
        total_seconds: clock.elapsed_s(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Dataset, LogisticProblem, QuadraticProblem};
    use nalgebra::{DMatrix, DVector};
    use rand_chacha::ChaCha8Rng;

    fn small_logistic(seed: u64) -> LogisticProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LogisticProblem::new(Dataset::synthetic(14, 50, &mut rng), 1e-2)
    }

    #[test]
    fn zero_iteration_budget_yields_single_record() {
        let problem = small_logistic(1);
        let cfg = SolverConfig {
            method: Method::GdArmijo,
            max_iters: 0,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &cfg, &DVector::from_element(14, 0.2));
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].k, 0);
        assert_eq!(trace.stop, StopReason::IterationLimit);
        assert_eq!(trace.stop.exit_code(), 2);
    }

    #[test]
    fn zero_time_budget_yields_single_record() {
        let problem = small_logistic(2);
        let cfg = SolverConfig {
            method: Method::GdArmijo,
            max_seconds: 0.0,
            ..SolverConfig::default()
        };
        let mut clock = ManualClock::new(0.001);
        let trace =
            solve_instrumented(&problem, &cfg, &DVector::zeros(14), &mut NoopMonitor, &mut clock);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.stop, StopReason::TimeLimit);
    }

    #[test]
    fn gradient_already_below_tolerance_stops_immediately() {
        let problem = QuadraticProblem::new(DMatrix::identity(3, 3), DVector::zeros(3));
        let cfg = SolverConfig {
            method: Method::CubicNewton,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &cfg, &DVector::zeros(3));
        assert_eq!(trace.stop, StopReason::Tolerance);
        assert_eq!(trace.steps(), 0);
        assert_eq!(trace.stop.exit_code(), 0);
    }

    #[test]
    fn identity_operator_quadratic_converges_fast() {
        // n = N with a fixed full gather: every step is coarse-admissible
        // until the eps floor kicks in, and the shifted exact solve
        // contracts superlinearly.
        let problem = QuadraticProblem::new(DMatrix::identity(6, 6), DVector::zeros(6));
        let cfg = SolverConfig {
            method: Method::MlConvex,
            schedule: ScheduleMode::Fixed(TransferOperator::identity(6)),
            grad_tol: 1e-10,
            max_iters: 30,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &cfg, &DVector::from_element(6, 2.0));
        assert_eq!(trace.stop, StopReason::Tolerance, "stop: {:?}", trace.stop);
        assert!(trace.steps() <= 30);
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        let problem = small_logistic(3);
        let cfg = SolverConfig {
            method: Method::MlNonconvexScen3,
            coarse_dim: 7,
            max_iters: 25,
            seed: 99,
            ..SolverConfig::default()
        };
        let x0 = DVector::from_element(14, 0.4);
        let mut c1 = ManualClock::new(0.0);
        let mut c2 = ManualClock::new(0.0);
        let t1 = solve_instrumented(&problem, &cfg, &x0, &mut NoopMonitor, &mut c1);
        let t2 = solve_instrumented(&problem, &cfg, &x0, &mut NoopMonitor, &mut c2);
        assert_eq!(t1.records, t2.records);
        assert_eq!(t1.audits, t2.audits);
    }

    #[test]
    fn all_methods_descend_monotonically() {
        let problem = small_logistic(4);
        let x0 = DVector::from_element(14, 0.3);
        for method in [
            Method::MlNonconvexScen1,
            Method::MlNonconvexScen2,
            Method::MlNonconvexScen3,
            Method::MlConvex,
            Method::GdArmijo,
            Method::CubicNewton,
        ] {
            let cfg = SolverConfig {
                method,
                coarse_dim: 7,
                rank: 4,
                max_iters: 15,
                seed: 5,
                ..SolverConfig::default()
            };
            let trace = solve(&problem, &cfg, &x0);
            assert!(
                trace.steps() > 0,
                "{} made no steps: {:?}",
                method.name(),
                trace.stop
            );
            for pair in trace.records.windows(2) {
                assert!(
                    pair[1].f <= pair[0].f,
                    "{} failed monotonicity at k={}",
                    method.name(),
                    pair[1].k
                );
            }
            for rec in &trace.records[1..] {
                assert!(rec.alpha > 0.0);
                assert!(rec.lambda_hat_sq >= 0.0);
            }
        }
    }

    #[test]
    fn invalid_config_reports_error_trace() {
        let problem = small_logistic(5);
        let cfg = SolverConfig {
            method: Method::MlConvex,
            coarse_dim: 0,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &cfg, &DVector::zeros(14));
        assert!(trace.records.is_empty());
        assert!(matches!(trace.stop, StopReason::Error(_)));
        assert_eq!(trace.stop.exit_code(), 1);
    }

    #[test]
    fn mismatched_initial_point_reports_error() {
        let problem = small_logistic(6);
        let cfg = SolverConfig {
            method: Method::GdArmijo,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &cfg, &DVector::zeros(3));
        assert!(matches!(trace.stop, StopReason::Error(_)));
    }

    #[test]
    fn descent_rule_defaults_follow_schedule() {
        let resample = SolverConfig {
            method: Method::MlConvex,
            schedule: ScheduleMode::Resample,
            ..SolverConfig::default()
        };
        assert_eq!(
            resample.effective_descent_rule(),
            DescentRule::TwoThirdsAlphaRSquared
        );
        let nonconvex = SolverConfig {
            method: Method::MlNonconvexScen1,
            schedule: ScheduleMode::Resample,
            ..SolverConfig::default()
        };
        assert_eq!(nonconvex.effective_descent_rule(), DescentRule::AlphaRSquared);
        let fixed = SolverConfig {
            method: Method::MlNonconvexScen1,
            schedule: ScheduleMode::Fixed(TransferOperator::identity(4)),
            ..SolverConfig::default()
        };
        assert_eq!(fixed.effective_descent_rule(), DescentRule::LambdaHalf);
        let forced = SolverConfig {
            descent_rule: Some(DescentRule::LambdaHalf),
            ..resample
        };
        assert_eq!(forced.effective_descent_rule(), DescentRule::LambdaHalf);
    }

    #[test]
    fn method_names_round_trip() {
        for method in [
            Method::MlNonconvexScen1,
            Method::MlNonconvexScen2,
            Method::MlNonconvexScen3,
            Method::MlConvex,
            Method::GdArmijo,
            Method::CubicNewton,
        ] {
            assert_eq!(Method::parse(method.name()), Some(method));
        }
        assert_eq!(Method::parse("newton"), None);
    }
}
