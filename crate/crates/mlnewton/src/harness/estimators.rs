//! Empirical convergence-rate and admissibility-frequency estimators.

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::problems::Objective;
use crate::solvers::StepRecord;
use crate::transfer::TransferOperator;

/// Gaps this small are treated as converged-to-reference noise and
/// clamped before taking logs.
pub const GAP_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EstimateError {
    #[error("no record has f above f_star: f_star too large")]
    NonPositiveGaps,
    #[error("need at least {need} usable records after k_min, found {found}")]
    TooFewPoints { need: usize, found: usize },
}

/// Least-squares slope of `log(f_k - f_star)` against `log k` over the
/// records with `k >= max(k_min, 1)`. A slope near `-p` means the gap
/// decays like `k^-p`.
pub fn estimate_rate(
    records: &[StepRecord],
    f_star: f64,
    k_min: usize,
) -> Result<f64, EstimateError> {
    let start = k_min.max(1);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut any_positive = false;
    for r in records {
        if r.k < start {
            continue;
        }
        let gap = r.f - f_star;
        if gap > 0.0 {
            any_positive = true;
        }
        pts.push(((r.k as f64).ln(), gap.max(GAP_FLOOR).ln()));
    }
    if !any_positive {
        return Err(EstimateError::NonPositiveGaps);
    }
    const MIN_POINTS: usize = 10;
    if pts.len() < MIN_POINTS {
        return Err(EstimateError::TooFewPoints { need: MIN_POINTS, found: pts.len() });
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in &pts {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    Ok(sxy / sxx)
}

/// Empirical admissibility frequencies from [`estimate_delta`].
#[derive(Debug, Clone)]
pub struct DeltaEstimate {
    /// Per-sample-point frequency, in input order.
    pub per_point: Vec<f64>,
    /// Fraction over all draws at all points.
    pub aggregate: f64,
    /// Total operator draws.
    pub draws: usize,
}

/// Estimates how often a fresh uniform coarse operator keeps a `mu_hat`
/// fraction of the gradient: the empirical probability of
/// `||R grad|| > mu_hat ||grad||` over `trials` draws per point. `n` equal
/// to the problem dimension degenerates to the full gather, which always
/// succeeds on nonzero gradients.
pub fn estimate_delta(
    problem: &dyn Objective,
    x_samples: &[DVector<f64>],
    n: usize,
    mu_hat: f64,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> DeltaEstimate {
    assert!(trials >= 1, "need at least one draw");
    assert!(mu_hat > 0.0 && mu_hat < 1.0, "mu_hat must lie in (0, 1)");
    let big_n = problem.dim();
    assert!(n >= 1 && n <= big_n, "coarse dimension out of range");
    let mut per_point = Vec::with_capacity(x_samples.len());
    let mut successes_total = 0usize;
    for x in x_samples {
        let g = problem.gradient(x);
        let g_norm = g.norm();
        let mut successes = 0usize;
        for _ in 0..trials {
            let op = if n == big_n {
                TransferOperator::identity(big_n)
            } else {
                TransferOperator::sample_uniform(big_n, n, rng)
                    .expect("dimensions validated above")
            };
            if op.restrict(&g).norm() > mu_hat * g_norm {
                successes += 1;
            }
        }
        successes_total += successes;
        per_point.push(successes as f64 / trials as f64);
    }
    let draws = trials * x_samples.len();
    DeltaEstimate {
        per_point,
        aggregate: if draws == 0 { 0.0 } else { successes_total as f64 / draws as f64 },
        draws,
    }
}
