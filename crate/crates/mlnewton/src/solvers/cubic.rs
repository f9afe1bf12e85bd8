//! Cubic-regularized Newton baseline.
//!
//! The subproblem `min_d <g,d> + 1/2 <H d, d> + (M/6) ||d||^3` is solved
//! through one eigendecomposition of `H` and a safeguarded bisection on
//! the radius `rho = ||d||`: the stationarity condition pins
//! `||(H + (M rho / 2) I)^{-1} g|| = rho` on the branch where the shifted
//! matrix is positive definite. The regularization weight `M` is adapted
//! by the same doubling scheme the multilevel methods use.

use nalgebra::{DMatrix, DVector};

use super::line_search::MAX_DOUBLINGS;
use super::{Level, SolverConfig, SolverError, SolverState, StepOutcome};
use crate::problems::Objective;

/// Bisection width target, relative to the bracket endpoint.
const BISECT_REL_TOL: f64 = 1e-12;
const BISECT_MAX_ITERS: usize = 200;

/// Solves the cubic model for dense symmetric `h`. Returns the minimizer
/// and its norm.
pub fn solve_cubic_subproblem(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    m: f64,
) -> Result<(DVector<f64>, f64), SolverError> {
    assert_eq!(h.nrows(), h.ncols(), "H must be square");
    assert_eq!(h.nrows(), g.len(), "g dimension mismatch");
    assert!(m > 0.0 && m.is_finite(), "M must be positive");
    let eig = h.clone().symmetric_eigen();
    let d = subproblem_from_eig(&eig.eigenvalues, &eig.eigenvectors, g, m)?;
    let rho = d.norm();
    Ok((d, rho))
}

/// Core solve against a precomputed eigendecomposition, so the adaptive
/// `M` loop factors the Hessian once per outer iteration.
fn subproblem_from_eig(
    vals: &DVector<f64>,
    vecs: &DMatrix<f64>,
    g: &DVector<f64>,
    m: f64,
) -> Result<DVector<f64>, SolverError> {
    let n = vals.len();
    let ghat = vecs.transpose() * g;
    let ghat_norm = ghat.norm();
    let lam_min = vals.min();
    let (j_min, _) = vals.argmin();
    // Below rho_low the shifted matrix loses positive definiteness.
    let rho_low = (-2.0 * lam_min / m).max(0.0);
    let gap_tol = 1e-12 * vals.abs().max().max(1.0);

    if ghat_norm == 0.0 {
        if rho_low == 0.0 {
            return Ok(DVector::zeros(n));
        }
        // Pure negative-curvature move to the stationary radius.
        return Ok(rho_low * vecs.column(j_min));
    }

    let phi = |rho: f64| -> f64 {
        let mut acc = 0.0;
        for j in 0..n {
            let t = ghat[j] / (vals[j] + 0.5 * m * rho);
            acc += t * t;
        }
        acc.sqrt()
    };

    // Hard case: the gradient has no mass on the bottom eigenspace and the
    // remaining components alone stay inside the critical radius, so the
    // solution needs an explicit bottom-eigenvector contribution.
    if rho_low > 0.0 {
        let bottom_mass: f64 = (0..n)
            .filter(|&j| vals[j] <= lam_min + gap_tol)
            .map(|j| ghat[j] * ghat[j])
            .sum::<f64>()
            .sqrt();
        if bottom_mass <= 1e-13 * ghat_norm {
            let mut coef = DVector::zeros(n);
            for j in 0..n {
                if vals[j] > lam_min + gap_tol {
                    coef[j] = -ghat[j] / (vals[j] + 0.5 * m * rho_low);
                }
            }
            let reg_norm_sq = coef.norm_squared();
            if reg_norm_sq <= rho_low * rho_low {
                let tau = (rho_low * rho_low - reg_norm_sq).max(0.0).sqrt();
                let mut d = vecs * coef;
                d.axpy(tau, &vecs.column(j_min).into_owned(), 1.0);
                return Ok(d);
            }
        }
    }

    // Regular case: phi is strictly decreasing on (rho_low, inf) and
    // crosses the identity exactly once. Bracket, then bisect.
    let mut lo = rho_low;
    let mut hi = 2.0 * rho_low + 1.0;
    let mut expansions = 0u32;
    while phi(hi) > hi {
        hi *= 2.0;
        expansions += 1;
        if expansions > 1100 || !hi.is_finite() {
            return Err(SolverError::CubicBracket);
        }
    }
    for _ in 0..BISECT_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECT_REL_TOL * hi.max(1.0) {
            break;
        }
    }
    let rho = 0.5 * (lo + hi);
    let mut coef = DVector::zeros(n);
    for j in 0..n {
        coef[j] = -ghat[j] / (vals[j] + 0.5 * m * rho);
    }
    Ok(vecs * coef)
}

pub(crate) fn cubic_newton_step(
    problem: &dyn Objective,
    cfg: &SolverConfig,
    state: &SolverState,
) -> Result<StepOutcome, SolverError> {
    let g = &state.grad;
    let g_norm = g.norm();
    let h = problem.hessian(&state.x);
    let eig = h.clone().symmetric_eigen();
    for i in 1..=MAX_DOUBLINGS {
        let pow = f64::powi(2.0, i as i32);
        let m = pow * state.l;
        let d = subproblem_from_eig(&eig.eigenvalues, &eig.eigenvectors, g, m)?;
        let rho = d.norm();
        let x = &state.x + &d;
        let f = problem.value(&x);
        if f.is_finite() && f <= state.f - m / 12.0 * rho * rho * rho {
            let grad_next = problem.gradient(&x);
            let post = grad_next.norm();
            return Ok(StepOutcome {
                f_next: f,
                grad_next,
                reduced_grad_norm: g_norm,
                alpha: 0.5 * m * rho,
                lambda_hat_sq: (-g.dot(&d)).max(0.0),
                step_norm: rho,
                level: Level::Fine,
                inner_loops: i,
                l_next: cfg.l0.max(0.5 * pow * state.l),
                s_next: state.s,
                post_reduced_grad_norm: post,
                coarse_step_norm: rho,
                x_next: x,
                d_fine: d,
                d_coarse: None,
                operator: None,
                surrogate: None,
                hessian_ref: Some(h),
            });
        }
    }
    Err(SolverError::LineSearchFailed(MAX_DOUBLINGS))
}
