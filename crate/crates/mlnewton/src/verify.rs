//! Independent oracles and per-step monitors.
//!
//! Everything here recomputes solver quantities from scratch (finite
//! differences, dense matrix algebra, raw trace arithmetic) so tests can
//! cross-check the fast paths. Monitors never abort a run; they collect
//! pass/fail entries with slack values into a [`LemmaMonitorReport`].

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::problems::Objective;
use crate::solvers::{Level, StepContext, StepMonitor, Trace};
use crate::transfer::TransferOperator;

/// Relative tolerance for the decrement identity `<g, d_H> = -lambda^2`.
pub const IDENTITY_REL_TOL: f64 = 1e-10;
/// Absolute slack allowed on `||d_h||^2 <= lambda^2 / alpha`.
pub const STEP_NORM_ABS_TOL: f64 = 1e-12;
/// Relative rounding allowance on the curvature inequality.
pub const CURVATURE_REL_TOL: f64 = 1e-8;
/// Relative rounding allowance on the descent-chain bound.
pub const CHAIN_REL_TOL: f64 = 1e-10;
/// Relative rounding allowance on the post-step reduced-gradient bound.
pub const POST_STEP_REL_TOL: f64 = 1e-8;

/// Central-difference settings.
#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    /// Base step; must stay well above round-off.
    pub h: f64,
    /// Scale each coordinate's step by `1 + |x_i|`.
    pub relative: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { h: 1e-5, relative: true }
    }
}

/// Central-difference gradient oracle.
pub fn fd_gradient(problem: &dyn Objective, x: &DVector<f64>, cfg: FdConfig) -> DVector<f64> {
    assert!(cfg.h > 1e-10, "difference step too small for f64");
    let n = x.len();
    let mut g = DVector::zeros(n);
    let mut probe = x.clone();
    for i in 0..n {
        let h = if cfg.relative { cfg.h * (1.0 + x[i].abs()) } else { cfg.h };
        probe[i] = x[i] + h;
        let fp = problem.value(&probe);
        probe[i] = x[i] - h;
        let fm = problem.value(&probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Forms the reduced Hessian `R H P` through explicit dense products,
/// independently of the slicing fast path.
pub fn brute_force_reduced_hessian(
    problem: &dyn Objective,
    op: &TransferOperator,
    x: &DVector<f64>,
) -> DMatrix<f64> {
    let h = problem.hessian(x);
    let big_n = op.fine_dim();
    let n = op.coarse_dim();
    let mut rh = DMatrix::zeros(n, big_n);
    for j in 0..big_n {
        let col = op.restrict(&h.column(j).into_owned());
        rh.set_column(j, &col);
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let p_col = op.prolong(&e);
        out.set_column(i, &(&rh * &p_col));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// `<g, d_H> + lambda_hat_sq = 0` (relative).
    DecrementIdentity,
    /// `<Q d_h, d_h> <= (s - alpha) ||d_h||^2 + lambda_hat_sq` with the
    /// measured per-step deviation `s`.
    CurvatureBound,
    /// `||d_h||^2 <= lambda_hat_sq / alpha`.
    StepNormBound,
    /// `f' <= f - mu^2 ||grad'||^2 / (c alpha)`.
    DescentChain,
    /// `||R grad'|| <= 2 alpha ||d_h||`.
    PostStepBound,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::DecrementIdentity => "decrement-identity",
            CheckKind::CurvatureBound => "curvature-bound",
            CheckKind::StepNormBound => "step-norm-bound",
            CheckKind::DescentChain => "descent-chain",
            CheckKind::PostStepBound => "post-step-bound",
        }
    }
}

/// One monitored inequality at one iteration. `slack >= 0` means the
/// inequality held with that much room (after the tolerance used for the
/// boolean); negative slack quantifies a violation.
#[derive(Debug, Clone)]
pub struct CheckEntry {
    pub k: usize,
    pub check: CheckKind,
    pub ok: bool,
    pub slack: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LemmaMonitorReport {
    pub entries: Vec<CheckEntry>,
}

impl LemmaMonitorReport {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.ok)
    }

    pub fn violations(&self) -> usize {
        self.entries.iter().filter(|e| !e.ok).count()
    }

    pub fn first_violation(&self) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| !e.ok)
    }

    /// Smallest slack across entries; `+inf` when empty.
    pub fn worst_slack(&self) -> f64 {
        self.entries.iter().map(|e| e.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn merge(&mut self, other: LemmaMonitorReport) {
        self.entries.extend(other.entries);
    }

    /// Serializes the report in the trace CSV dialect, all columns under a
    /// `check_` prefix. Returns bytes written.
    pub fn write_csv(&self, sink: &mut dyn Write) -> io::Result<usize> {
        let mut buf = String::from("check_k,check_name,check_ok,check_slack\n");
        for e in &self.entries {
            buf.push_str(&format!("{},{},{},{}\n", e.k, e.check.name(), e.ok, e.slack));
        }
        sink.write_all(buf.as_bytes())?;
        Ok(buf.len())
    }
}

/// Raw material for the per-step identity checks.
pub struct StepDiagnostics<'a> {
    pub k: usize,
    /// Gradient at the departing iterate.
    pub grad: &'a DVector<f64>,
    pub d_fine: &'a DVector<f64>,
    /// Coarse direction; pass the fine direction on fine-level steps.
    pub d_coarse: &'a DVector<f64>,
    /// Matrix the surrogate was built from.
    pub q: &'a DMatrix<f64>,
    /// Measured deviation `||B - Q||_2` on this step.
    pub deviation: f64,
    pub alpha: f64,
    pub lambda_hat_sq: f64,
}

/// Checks the decrement identity, the curvature inequality, and the
/// step-norm bound for one accepted step.
pub fn check_step_identities(diag: &StepDiagnostics<'_>) -> LemmaMonitorReport {
    let mut report = LemmaMonitorReport::default();
    let lh = diag.lambda_hat_sq;

    let inner = diag.grad.dot(diag.d_fine);
    let identity_gap = (inner + lh).abs() / (1.0 + lh);
    report.entries.push(CheckEntry {
        k: diag.k,
        check: CheckKind::DecrementIdentity,
        ok: identity_gap <= IDENTITY_REL_TOL,
        slack: IDENTITY_REL_TOL - identity_gap,
    });

    let dh_sq = diag.d_coarse.norm_squared();
    let lhs = diag.d_coarse.dot(&(diag.q * diag.d_coarse));
    let rhs = (diag.deviation - diag.alpha) * dh_sq + lh;
    let curvature_tol = CURVATURE_REL_TOL * (1.0 + lhs.abs() + rhs.abs());
    report.entries.push(CheckEntry {
        k: diag.k,
        check: CheckKind::CurvatureBound,
        ok: lhs <= rhs + curvature_tol,
        slack: rhs - lhs,
    });

    let bound = lh / diag.alpha + STEP_NORM_ABS_TOL;
    report.entries.push(CheckEntry {
        k: diag.k,
        check: CheckKind::StepNormBound,
        ok: dh_sq <= bound,
        slack: bound - dh_sq,
    });

    report
}

/// Streaming monitor that runs [`check_step_identities`] on every
/// surrogate-bearing step of a live solve.
#[derive(Default)]
pub struct LemmaMonitor {
    pub report: LemmaMonitorReport,
}

impl StepMonitor for LemmaMonitor {
    fn on_step(&mut self, _problem: &dyn Objective, ctx: &StepContext<'_>) {
        let (surrogate, q) = match (ctx.surrogate, ctx.hessian_ref) {
            (Some(s), Some(q)) => (s, q),
            _ => return,
        };
        let d_coarse = ctx.d_coarse.unwrap_or(ctx.d_fine);
        let diag = StepDiagnostics {
            k: ctx.k,
            grad: ctx.grad_prev,
            d_fine: ctx.d_fine,
            d_coarse,
            q,
            deviation: surrogate.deviation(q),
            alpha: ctx.alpha,
            lambda_hat_sq: ctx.lambda_hat_sq,
        };
        self.report.merge(check_step_identities(&diag));
    }
}

/// Inputs for [`check_descent_chain`].
#[derive(Debug, Clone, Copy)]
pub struct ChainConstants {
    /// Fixed gate fraction; `None` substitutes the measured per-step ratio
    /// `||R grad'|| / ||grad'||` from the audit data.
    pub mu: Option<f64>,
    /// Use the convex randomized divisor 6 instead of 8.
    pub convex_randomized: bool,
}

/// Verifies `f' <= f - mu^2 ||grad'||^2 / (c alpha)` on every coarse step
/// of a finished trace, with `c = 8` (or 6 for the convex randomized
/// bound).
pub fn check_descent_chain(trace: &Trace, constants: &ChainConstants) -> LemmaMonitorReport {
    let divisor = if constants.convex_randomized { 6.0 } else { 8.0 };
    let mut report = LemmaMonitorReport::default();
    for j in 1..trace.records.len() {
        let rec = &trace.records[j];
        if rec.level != Level::Coarse {
            continue;
        }
        let prev = &trace.records[j - 1];
        let audit = &trace.audits[j - 1];
        let numerator_sq = match constants.mu {
            Some(mu) => (mu * rec.grad_norm).powi(2),
            None => audit.post_reduced_grad_norm.powi(2),
        };
        let required = numerator_sq / (divisor * rec.alpha);
        let achieved = prev.f - rec.f;
        let tol = CHAIN_REL_TOL * (1.0 + prev.f.abs());
        report.entries.push(CheckEntry {
            k: rec.k,
            check: CheckKind::DescentChain,
            ok: achieved >= required - tol,
            slack: achieved - required,
        });
    }
    report
}

/// Verifies `||R grad'|| <= 2 alpha ||d_h||` across a multilevel trace.
/// Meaningful when the run's shifts came from true or conservative
/// constants.
pub fn check_post_step_bound(trace: &Trace) -> LemmaMonitorReport {
    let mut report = LemmaMonitorReport::default();
    if !trace.meta.method.is_multilevel() {
        return report;
    }
    for j in 1..trace.records.len() {
        let rec = &trace.records[j];
        let audit = &trace.audits[j - 1];
        let bound = 2.0 * rec.alpha * audit.coarse_step_norm;
        let tol = POST_STEP_REL_TOL * (1.0 + bound);
        report.entries.push(CheckEntry {
            k: rec.k,
            check: CheckKind::PostStepBound,
            ok: audit.post_reduced_grad_norm <= bound + tol,
            slack: bound - audit.post_reduced_grad_norm,
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hessian::build_exact;
    use crate::problems::{Dataset, LogisticProblem, NllsProblem, QuadraticProblem};
    use crate::solvers::{
        solve, Method, ScheduleMode, SolverConfig, StepAudit, StepRecord, StopReason,
    };
    use crate::transfer::TransferOperator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fd_gradient_on_square_norm() {
        // f = ||x||^2 has gradient 2x.
        let problem =
            QuadraticProblem::new(DMatrix::identity(2, 2) * 2.0, DVector::zeros(2));
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let g = fd_gradient(&problem, &x, FdConfig::default());
        assert!((g[0] - 2.0).abs() <= 1e-8);
        assert!((g[1] - 4.0).abs() <= 1e-8);
    }

    #[test]
    fn fd_gradient_exact_on_affine() {
        // Central differences have zero truncation error on affine f.
        let problem = QuadraticProblem::new(
            DMatrix::zeros(3, 3),
            DVector::from_vec(vec![1.5, -2.0, 0.25]),
        );
        let x = DVector::from_vec(vec![3.0, -1.0, 7.0]);
        let g = fd_gradient(&problem, &x, FdConfig { h: 1e-3, relative: false });
        let exact = problem.gradient(&x);
        assert!((g - exact).norm() <= 1e-10);
    }

    #[test]
    fn fd_gradient_matches_logistic_analytic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data = Dataset::synthetic(10, 40, &mut rng);
        let problem = LogisticProblem::new(data, 1e-3);
        let x = DVector::from_fn(10, |i, _| 0.2 * ((i + 1) as f64).cos());
        let fd = fd_gradient(&problem, &x, FdConfig::default());
        let exact = problem.gradient(&x);
        assert!((fd - &exact).norm() <= 1e-5 * (1.0 + exact.norm()));
    }

    #[test]
    fn brute_force_matches_submatrix_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let data = Dataset::synthetic(12, 30, &mut rng);
        let problem = NllsProblem::new(data);
        let x = DVector::from_element(12, 0.1);
        let op = TransferOperator::from_indices(vec![1, 4, 5, 9], 12).unwrap();
        let brute = brute_force_reduced_hessian(&problem, &op, &x);
        let fast = op.reduced_hessian(&problem, &x);
        assert_eq!(brute, fast);
    }

    #[test]
    fn brute_force_matches_dense_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let raw = DMatrix::from_fn(4, 20, |_, _| rng.gen_range(-1.0..1.0));
        let op = TransferOperator::dense(raw);
        let a = {
            let m = DMatrix::from_fn(20, 20, |i, j| ((i * 7 + j * 3) as f64).sin());
            &m * m.transpose() / 20.0 + DMatrix::identity(20, 20)
        };
        let problem = QuadraticProblem::new(a, DVector::zeros(20));
        let x = DVector::from_element(20, 0.5);
        let brute = brute_force_reduced_hessian(&problem, &op, &x);
        let fast = op.reduced_hessian(&problem, &x);
        assert!((&brute - &fast).abs().max() <= 1e-12 * (1.0 + brute.abs().max()));
    }

    #[test]
    fn brute_force_identity_recovers_full_hessian() {
        let problem = QuadraticProblem::new(DMatrix::identity(5, 5) * 3.0, DVector::zeros(5));
        let op = TransferOperator::identity(5);
        let x = DVector::zeros(5);
        let brute = brute_force_reduced_hessian(&problem, &op, &x);
        assert_eq!(brute, problem.hessian(&x));
    }

    #[test]
    fn step_identities_hold_on_exact_coarse_step() {
        // Hand-built coarse step on the quadratic: Q = I_2 slice of I_4,
        // alpha = 1, rg = (1, 2): d_h = -rg / 2, lambda = |rg|^2 / 2.
        let op = TransferOperator::from_indices(vec![0, 2], 4).unwrap();
        let q = DMatrix::identity(2, 2);
        let surrogate = build_exact(q.clone());
        let grad = DVector::from_vec(vec![1.0, 0.0, 2.0, 0.0]);
        let rg = op.restrict(&grad);
        let (d_h, d_fine, lh) =
            crate::solvers::coarse_direction(&op, &surrogate, 1.0, &rg).unwrap();
        let diag = StepDiagnostics {
            k: 1,
            grad: &grad,
            d_fine: &d_fine,
            d_coarse: &d_h,
            q: &q,
            deviation: surrogate.deviation(&q),
            alpha: 1.0,
            lambda_hat_sq: lh,
        };
        let report = check_step_identities(&diag);
        assert!(report.all_ok(), "violation: {:?}", report.first_violation());
        // Exact surrogate: deviation 0, so the curvature bound is the
        // equality chain <Qd,d> = lambda - alpha ||d||^2 up to rounding.
        let curv = report
            .entries
            .iter()
            .find(|e| e.check == CheckKind::CurvatureBound)
            .unwrap();
        assert!(curv.slack.abs() <= 1e-12);
    }

    #[test]
    fn zero_gradient_step_is_vacuous() {
        let q = DMatrix::identity(3, 3);
        let zero = DVector::zeros(3);
        let diag = StepDiagnostics {
            k: 7,
            grad: &zero,
            d_fine: &zero,
            d_coarse: &zero,
            q: &q,
            deviation: 0.0,
            alpha: 0.5,
            lambda_hat_sq: 0.0,
        };
        let report = check_step_identities(&diag);
        assert!(report.all_ok());
    }

    #[test]
    fn live_monitor_passes_on_logistic_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let data = Dataset::synthetic(16, 60, &mut rng);
        let problem = LogisticProblem::new(data, 1e-2);
        let cfg = SolverConfig {
            method: Method::MlNonconvexScen1,
            coarse_dim: 8,
            max_iters: 30,
            seed: 2,
            ..SolverConfig::default()
        };
        let mut monitor = LemmaMonitor::default();
        let mut clock = crate::solvers::ManualClock::new(0.0);
        let trace = crate::solvers::solve_instrumented(
            &problem,
            &cfg,
            &DVector::from_element(16, 0.3),
            &mut monitor,
            &mut clock,
        );
        assert!(trace.steps() > 0);
        assert!(!monitor.report.entries.is_empty());
        assert!(
            monitor.report.all_ok(),
            "violation: {:?}",
            monitor.report.first_violation()
        );
    }

    fn quadratic_identity_trace() -> Trace {
        let problem = QuadraticProblem::new(DMatrix::identity(6, 6), DVector::zeros(6));
        let cfg = SolverConfig {
            method: Method::MlConvex,
            schedule: ScheduleMode::Fixed(TransferOperator::identity(6)),
            grad_tol: 1e-9,
            max_iters: 40,
            ..SolverConfig::default()
        };
        let trace = solve(&problem, &cfg, &DVector::from_element(6, 1.5));
        assert_eq!(trace.stop, StopReason::Tolerance);
        trace
    }

    #[test]
    fn descent_chain_clean_on_quadratic_run() {
        let trace = quadratic_identity_trace();
        // Identity operator: the measured ratio is exactly 1.
        let measured = check_descent_chain(&trace, &ChainConstants {
            mu: None,
            convex_randomized: false,
        });
        assert!(!measured.entries.is_empty());
        assert!(measured.all_ok(), "violation: {:?}", measured.first_violation());
        let fixed = check_descent_chain(&trace, &ChainConstants {
            mu: Some(0.1),
            convex_randomized: false,
        });
        assert!(fixed.all_ok());
    }

    #[test]
    fn post_step_bound_clean_on_quadratic_run() {
        // True Hessian-Lipschitz constant is zero on a quadratic, so any
        // accepted shift satisfies the lemma premise.
        let trace = quadratic_identity_trace();
        let report = check_post_step_bound(&trace);
        assert!(!report.entries.is_empty());
        assert!(report.all_ok(), "violation: {:?}", report.first_violation());
    }

    #[test]
    fn descent_chain_flags_inflated_objective() {
        let mut trace = quadratic_identity_trace();
        // Corrupt one row: bump f above its predecessor.
        let j = trace.records.len() / 2;
        assert!(j >= 1);
        trace.records[j].f = trace.records[j - 1].f + 1.0;
        let report = check_descent_chain(&trace, &ChainConstants {
            mu: None,
            convex_randomized: false,
        });
        let first = report.first_violation().expect("corruption must be caught");
        assert_eq!(first.k, trace.records[j].k);
    }

    #[test]
    fn report_csv_uses_check_prefix() {
        let report = LemmaMonitorReport {
            entries: vec![CheckEntry {
                k: 3,
                check: CheckKind::DescentChain,
                ok: true,
                slack: 0.25,
            }],
        };
        let mut buf = Vec::new();
        let n = report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(n, text.len());
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "check_k,check_name,check_ok,check_slack"
        );
        assert_eq!(lines.next().unwrap(), "3,descent-chain,true,0.25");
    }

    #[test]
    fn synthetic_trace_with_known_violation_row() {
        // Fully hand-built trace: one clean coarse step, one violating.
        let meta = crate::solvers::RunMeta {
            method: Method::MlConvex,
            mu: 0.1,
            omega: 1.0,
            l0: 1e-12,
            s0: 0.0,
            descent_rule: crate::solvers::DescentRule::LambdaHalf,
            grad_tol: 1e-5,
            seed: 0,
            fine_dim: 4,
            coarse_dim: 2,
        };
        let rec = |k: usize, f: f64, alpha: f64| StepRecord {
            k,
            f,
            grad_norm: 1.0,
            reduced_grad_norm: 1.0,
            alpha,
            lambda_hat_sq: 0.5,
            step_norm: 0.5,
            level: Level::Coarse,
            inner_loops: 1,
            elapsed_s: 0.0,
        };
        let audit = |post: f64| StepAudit {
            post_reduced_grad_norm: post,
            accepted_l: 1e-12,
            accepted_s: 0.0,
            coarse_step_norm: 0.5,
        };
        let trace = Trace {
            meta,
            records: vec![
                StepRecord {
                    k: 0,
                    f: 10.0,
                    grad_norm: 2.0,
                    reduced_grad_norm: 0.0,
                    alpha: 0.0,
                    lambda_hat_sq: 0.0,
                    step_norm: 0.0,
                    level: Level::Fine,
                    inner_loops: 0,
                    elapsed_s: 0.0,
                },
                rec(1, 9.0, 1.0),
                rec(2, 8.999, 1.0),
            ],
            audits: vec![audit(0.1), audit(3.0)],
            stop: StopReason::IterationLimit,
            total_seconds: 0.0,
        };
        // Step 1: required 0.01^2... post=0.1 -> 0.1^2/8 = 0.00125 <= 1.0
        // decrease: ok. Step 2: post=3 -> 9/8 = 1.125 > 0.001: violation.
        let report = check_descent_chain(&trace, &ChainConstants {
            mu: None,
            convex_randomized: false,
        });
        assert_eq!(report.violations(), 1);
        assert_eq!(report.first_violation().unwrap().k, 2);
    }
}
