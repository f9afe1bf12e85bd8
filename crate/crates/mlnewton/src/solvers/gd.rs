//! Gradient descent with Armijo backtracking.

use super::{Level, SolverError, SolverState, StepOutcome};
use crate::problems::Objective;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: u32 = 60;

/// Backtracks from `t = 1`, halving until
/// `f(x - t g) <= f(x) - c t ||g||^2`.
pub(crate) fn gd_armijo_step(
    problem: &dyn Objective,
    state: &SolverState,
) -> Result<StepOutcome, SolverError> {
    let g = &state.grad;
    let g_norm_sq = g.norm_squared();
    let mut t = 1.0;
    for trial in 1..=MAX_HALVINGS {
        let d = g * (-t);
        let x = &state.x + &d;
        let f = problem.value(&x);
        if f.is_finite() && f <= state.f - ARMIJO_C * t * g_norm_sq {
            let grad_next = problem.gradient(&x);
            let post = grad_next.norm();
            return Ok(StepOutcome {
                f_next: f,
                grad_next,
                reduced_grad_norm: g_norm_sq.sqrt(),
                alpha: t,
                lambda_hat_sq: 0.0,
                step_norm: d.norm(),
                level: Level::Fine,
                inner_loops: trial,
                l_next: state.l,
                s_next: state.s,
                post_reduced_grad_norm: post,
                coarse_step_norm: d.norm(),
                x_next: x,
                d_fine: d,
                d_coarse: None,
                operator: None,
                surrogate: None,
                hessian_ref: None,
            });
        }
        t *= 0.5;
    }
    Err(SolverError::LineSearchFailed(MAX_HALVINGS))
}
