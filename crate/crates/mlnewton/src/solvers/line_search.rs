//! Adaptive regularization search shared by the multilevel methods.
//!
//! Each outer iteration tries shifts built from doubled estimates
//! `2^i * L_k` and `2^i * s_k` until the trial point satisfies the active
//! descent rule, then halves the winning estimates back into the carried
//! state (floored at their initial values). The accepted trial count `i`
//! is reported as `inner_loops`, so the total inner work over a run
//! telescopes against how far `L` grew.

use nalgebra::DVector;

use super::SolverError;

/// Acceptance test for a trial point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentRule {
    /// `f' <= f - lambda_hat_sq / 2`
    LambdaHalf,
    /// `f' <= f - alpha * step_norm^2 / 2`
    AlphaRSquared,
    /// `f' <= f - 2 * alpha * step_norm^2 / 3`
    TwoThirdsAlphaRSquared,
}

impl DescentRule {
    pub fn required_decrease(self, lambda_hat_sq: f64, alpha: f64, step_norm: f64) -> f64 {
        match self {
            DescentRule::LambdaHalf => 0.5 * lambda_hat_sq,
            DescentRule::AlphaRSquared => 0.5 * alpha * step_norm * step_norm,
            DescentRule::TwoThirdsAlphaRSquared => 2.0 / 3.0 * alpha * step_norm * step_norm,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DescentRule::LambdaHalf => "lambda-half",
            DescentRule::AlphaRSquared => "alpha-r-squared",
            DescentRule::TwoThirdsAlphaRSquared => "two-thirds-alpha-r-squared",
        }
    }

    pub fn parse(s: &str) -> Option<DescentRule> {
        Some(match s {
            "lambda-half" => DescentRule::LambdaHalf,
            "alpha-r-squared" => DescentRule::AlphaRSquared,
            "two-thirds-alpha-r-squared" => DescentRule::TwoThirdsAlphaRSquared,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchMode {
    /// Full adaptive search over both estimates.
    Doubling,
    /// Pure powers `alpha = 2^i * L0`; carried estimates stay untouched.
    Simplified,
}

/// Shift used for the regularized coarse system:
/// `alpha = s + sqrt(omega^3 * L * reduced_grad_norm / 2)`.
pub fn compute_alpha(s: f64, l: f64, reduced_grad_norm: f64, omega: f64) -> f64 {
    s + (omega.powi(3) * l * reduced_grad_norm / 2.0).sqrt()
}

pub(crate) const MAX_DOUBLINGS: u32 = 60;

/// A candidate step produced for one shift value.
#[derive(Debug)]
pub(crate) struct Trial {
    pub x: DVector<f64>,
    pub f: f64,
    pub lambda_hat_sq: f64,
    pub step_norm: f64,
    pub d_fine: DVector<f64>,
    pub d_coarse: Option<DVector<f64>>,
}

#[derive(Debug)]
pub(crate) struct Accepted {
    pub trial: Trial,
    pub alpha: f64,
    pub inner_loops: u32,
    pub l_next: f64,
    pub s_next: f64,
}

pub(crate) struct SearchParams {
    pub rule: DescentRule,
    pub mode: LineSearchMode,
    pub l0: f64,
    pub s0: f64,
    pub l_k: f64,
    pub s_k: f64,
    pub reduced_grad_norm: f64,
    pub omega: f64,
    pub f_curr: f64,
}

/// Runs the doubling search, asking `build` for the trial at each shift.
pub(crate) fn doubling_search(
    p: &SearchParams,
    mut build: impl FnMut(f64) -> Result<Trial, SolverError>,
) -> Result<Accepted, SolverError> {
    for i in 1..=MAX_DOUBLINGS {
        let pow = f64::powi(2.0, i as i32);
        let alpha = match p.mode {
            LineSearchMode::Doubling => {
                compute_alpha(pow * p.s_k, pow * p.l_k, p.reduced_grad_norm, p.omega)
            }
            LineSearchMode::Simplified => pow * p.l0,
        };
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(SolverError::Config(format!(
                "line search produced invalid shift {alpha}"
            )));
        }
        let trial = build(alpha)?;
        let required = p.rule.required_decrease(trial.lambda_hat_sq, alpha, trial.step_norm);
        if trial.f.is_finite() && trial.f <= p.f_curr - required {
            let half = pow / 2.0;
            let (l_next, s_next) = match p.mode {
                LineSearchMode::Doubling => {
                    (p.l0.max(half * p.l_k), p.s0.max(half * p.s_k))
                }
                LineSearchMode::Simplified => (p.l_k, p.s_k),
            };
            return Ok(Accepted { trial, alpha, inner_loops: i, l_next, s_next });
        }
    }
    Err(SolverError::LineSearchFailed(MAX_DOUBLINGS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn alpha_formula_matches_hand_values() {
        // s = 1, L = 2, r = 9, omega = 1: 1 + sqrt(2 * 9 / 2) = 4.
        assert_eq!(compute_alpha(1.0, 2.0, 9.0, 1.0), 4.0);
        // Zero deviation term leaves the pure square root.
        assert_eq!(compute_alpha(0.0, 8.0, 4.0, 1.0), 4.0);
        // omega enters cubed under the root: omega = 2 multiplies it by
        // sqrt(8).
        let base = compute_alpha(0.0, 8.0, 4.0, 1.0);
        let scaled = compute_alpha(0.0, 8.0, 4.0, 2.0);
        assert!((scaled - base * 8.0_f64.sqrt()).abs() < 1e-12);
    }

    fn quadratic_trial(f_curr: f64, slope: f64) -> impl FnMut(f64) -> Result<Trial, SolverError> {
        // Synthetic trial whose value improves once alpha is large enough:
        // f' = f_curr - slope * (1 - 5 / alpha), acceptable iff alpha >= 5.
        // Step data is inert.
        move |alpha| {
            Ok(Trial {
                x: DVector::zeros(1),
                f: f_curr - slope * (1.0 - 5.0 / alpha),
                lambda_hat_sq: 0.0,
                step_norm: 0.0,
                d_fine: DVector::zeros(1),
                d_coarse: None,
            })
        }
    }

    #[test]
    fn doubling_accepts_once_shift_is_large_enough() {
        let p = SearchParams {
            rule: DescentRule::LambdaHalf,
            mode: LineSearchMode::Simplified,
            l0: 1.0,
            s0: 0.0,
            l_k: 1.0,
            s_k: 0.0,
            reduced_grad_norm: 1.0,
            omega: 1.0,
            f_curr: 10.0,
        };
        // alpha = 2^i; the trial needs alpha >= 5, so the first acceptable
        // trial is i = 3 (alpha = 8).
        let acc = doubling_search(&p, quadratic_trial(10.0, 1.0)).unwrap();
        assert_eq!(acc.inner_loops, 3);
        assert_eq!(acc.alpha, 8.0);
        // Simplified mode leaves the carried estimates alone.
        assert_eq!(acc.l_next, 1.0);
        assert_eq!(acc.s_next, 0.0);
    }

    #[test]
    fn doubling_updates_estimates_with_floor() {
        let p = SearchParams {
            rule: DescentRule::LambdaHalf,
            mode: LineSearchMode::Doubling,
            l0: 0.5,
            s0: 0.0,
            l_k: 2.0,
            s_k: 0.0,
            // alpha(i) = sqrt(2^i * 2 * 2 / 2) = sqrt(2^(i+1)).
            reduced_grad_norm: 2.0,
            omega: 1.0,
            f_curr: 10.0,
        };
        // Needs alpha >= 5, i.e. 2^(i+1) >= 25, i.e. i = 4.
        let acc = doubling_search(&p, quadratic_trial(10.0, 1.0)).unwrap();
        assert_eq!(acc.inner_loops, 4);
        // l_next = max(l0, 2^(i-1) * l_k) = max(0.5, 8 * 2) = 16.
        assert_eq!(acc.l_next, 16.0);
        assert_eq!(acc.s_next, 0.0);
    }

    #[test]
    fn first_trial_acceptance_halves_back_to_floor() {
        let p = SearchParams {
            rule: DescentRule::LambdaHalf,
            mode: LineSearchMode::Doubling,
            l0: 1.0,
            s0: 0.25,
            l_k: 1.0,
            s_k: 0.25,
            reduced_grad_norm: 2.0,
            omega: 1.0,
            f_curr: 10.0,
        };
        // Always-accepting trial: i = 1, so the halving factor is 2^0 and
        // the floors keep both estimates at their starting values.
        let acc = doubling_search(&p, |_| {
            Ok(Trial {
                x: DVector::zeros(1),
                f: 0.0,
                lambda_hat_sq: 1.0,
                step_norm: 1.0,
                d_fine: DVector::zeros(1),
                d_coarse: None,
            })
        })
        .unwrap();
        assert_eq!(acc.inner_loops, 1);
        assert_eq!(acc.l_next, 1.0);
        assert_eq!(acc.s_next, 0.25);
    }

    #[test]
    fn exhaustion_is_an_error() {
        let p = SearchParams {
            rule: DescentRule::LambdaHalf,
            mode: LineSearchMode::Simplified,
            l0: 1.0,
            s0: 0.0,
            l_k: 1.0,
            s_k: 0.0,
            reduced_grad_norm: 1.0,
            omega: 1.0,
            f_curr: 0.0,
        };
        let err = doubling_search(&p, |_| {
            Ok(Trial {
                x: DVector::zeros(1),
                f: 1.0,
                lambda_hat_sq: 1.0,
                step_norm: 1.0,
                d_fine: DVector::zeros(1),
                d_coarse: None,
            })
        })
        .unwrap_err();
        assert!(matches!(err, SolverError::LineSearchFailed(60)));
    }

    #[test]
    fn rules_order_by_strictness_at_equal_inputs() {
        // With alpha * r^2 = lambda_hat_sq the step-norm rules demand
        // within a constant of the decrement rule: 1/2 vs 2/3.
        let lh = DescentRule::LambdaHalf.required_decrease(6.0, 2.0, 3.0_f64.sqrt());
        let ar = DescentRule::AlphaRSquared.required_decrease(6.0, 2.0, 3.0_f64.sqrt());
        let tt = DescentRule::TwoThirdsAlphaRSquared.required_decrease(6.0, 2.0, 3.0_f64.sqrt());
        assert!((lh - 3.0).abs() < 1e-12);
        assert!((ar - 3.0).abs() < 1e-12);
        assert!((tt - 4.0).abs() < 1e-12);
    }
}
