//! Positive semidefinite Hessian surrogates and shifted solves.
//!
//! The multilevel steps solve `(B + alpha I) d = rhs` where `B` approximates
//! a (possibly indefinite) reduced Hessian `Q` from below in deviation norm.
//! Three constructions are supported, trading accuracy against cost:
//!
//! - absolute-eigenvalue: `B = U |Lambda| U^T` from a full decomposition;
//! - randomized low-rank: `B = U_r |Lambda_r| U_r^T` from subspace
//!   iteration, solved through the Woodbury identity in `O(n r + r^3)`;
//! - minimal-eigenvalue shift: `B = Q + |min(0, lambda_min)| I`.
//!
//! An `Exact` passthrough covers convex problems where `Q` itself is PSD.

mod subspace;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use subspace::{lanczos_min_eig, randomized_range};

/// Eigenvalues with magnitude below this fraction of the spectral norm are
/// treated as zero when building surrogates.
pub const EIG_CLAMP_REL: f64 = 1e-12;

/// Default number of extra probe vectors for the randomized construction.
pub const OVERSAMPLE: usize = 8;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("shift alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("rank {r} invalid for dimension {n}")]
    BadRank { r: usize, n: usize },
    #[error("power_iters must be at least 1")]
    NoPowerIters,
    #[error("shifted system was not positive definite (internal error)")]
    IndefiniteSystem,
}

/// How `build_min_eig_shift` obtains the smallest eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigMode {
    /// Dense symmetric eigendecomposition.
    Full,
    /// Lanczos estimate, certified by its residual; falls back to the dense
    /// path below dimension 64 or when certification fails.
    Iterative,
}

#[derive(Debug, Clone)]
pub enum HessianSurrogate {
    /// `B = Q` verbatim; PSD only when the underlying problem is convex.
    Exact { q: DMatrix<f64> },
    /// `B = U |Lambda| U^T` with the full eigenbasis.
    AbsEig { u: DMatrix<f64>, lam: DVector<f64> },
    /// `B = U_r |Lambda_r| U_r^T`; zero eigenvalues are dropped, so the
    /// stored rank can be below the requested one.
    LowRankAbs { u: DMatrix<f64>, lam: DVector<f64> },
    /// `B = Q + sigma I` with `sigma = |min(0, lambda_min(Q))|`.
    Shifted { q: DMatrix<f64>, sigma: f64 },
}

pub fn build_exact(q: DMatrix<f64>) -> HessianSurrogate {
    assert_eq!(q.nrows(), q.ncols(), "Q must be square");
    HessianSurrogate::Exact { q }
}

/// Full eigendecomposition with eigenvalues replaced by their magnitudes.
pub fn build_abs_eig(q: &DMatrix<f64>) -> HessianSurrogate {
    assert_eq!(q.nrows(), q.ncols(), "Q must be square");
    let eig = q.clone().symmetric_eigen();
    let spectral = eig.eigenvalues.abs().max();
    let lam = eig.eigenvalues.map(|l| clamp_small(l.abs(), spectral));
    HessianSurrogate::AbsEig {
        u: eig.eigenvectors,
        lam,
    }
}

/// Randomized rank-`r` analogue of [`build_abs_eig`]: subspace iteration
/// with `r + 8` probes finds the dominant eigenspace by magnitude, the
/// projected problem is decomposed exactly, and the top `r` pairs are kept
/// with absolute eigenvalues.
pub fn build_lowrank_abs(
    q: &DMatrix<f64>,
    r: usize,
    power_iters: usize,
    rng: &mut ChaCha8Rng,
) -> Result<HessianSurrogate, SurrogateError> {
    assert_eq!(q.nrows(), q.ncols(), "Q must be square");
    let n = q.nrows();
    if r == 0 || r > n {
        return Err(SurrogateError::BadRank { r, n });
    }
    if power_iters == 0 {
        return Err(SurrogateError::NoPowerIters);
    }
    let basis = randomized_range(q, r + OVERSAMPLE, power_iters, rng);
    if basis.ncols() == 0 {
        // Zero matrix: the surrogate is empty.
        return Ok(HessianSurrogate::LowRankAbs {
            u: DMatrix::zeros(n, 0),
            lam: DVector::zeros(0),
        });
    }
    let projected = basis.transpose() * q * &basis;
    let projected = 0.5 * (&projected + projected.transpose());
    let eig = projected.symmetric_eigen();
    let spectral = eig.eigenvalues.abs().max();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .abs()
            .partial_cmp(&eig.eigenvalues[a].abs())
            .unwrap()
    });
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut lams: Vec<f64> = Vec::new();
    for &i in order.iter().take(r) {
        let lam = clamp_small(eig.eigenvalues[i].abs(), spectral);
        if lam == 0.0 {
            continue;
        }
        cols.push(&basis * eig.eigenvectors.column(i));
        lams.push(lam);
    }
    let u = if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    Ok(HessianSurrogate::LowRankAbs {
        u,
        lam: DVector::from_vec(lams),
    })
}

/// `B = Q + |min(0, lambda_min)| I`; no shift is applied when `Q` is
/// already PSD.
pub fn build_min_eig_shift(q: &DMatrix<f64>, mode: EigMode) -> HessianSurrogate {
    assert_eq!(q.nrows(), q.ncols(), "Q must be square");
    let n = q.nrows();
    let min_eig = match mode {
        EigMode::Iterative if n > 64 => {
            lanczos_min_eig(q, 48, 1e-9).unwrap_or_else(|| q.symmetric_eigenvalues().min())
        }
        _ => q.symmetric_eigenvalues().min(),
    };
    let sigma = if min_eig < 0.0 { -min_eig } else { 0.0 };
    HessianSurrogate::Shifted { q: q.clone(), sigma }
}

impl HessianSurrogate {
    pub fn dim(&self) -> usize {
        match self {
            HessianSurrogate::Exact { q } | HessianSurrogate::Shifted { q, .. } => q.nrows(),
            HessianSurrogate::AbsEig { u, .. } | HessianSurrogate::LowRankAbs { u, .. } => {
                u.nrows()
            }
        }
    }

    /// Solves `(B + alpha I) d = rhs` for `alpha > 0`.
    ///
    /// Dense variants factor the shifted matrix (Cholesky; the shift makes
    /// it positive definite). The eigenbasis variants invert in their
    /// factored form; in particular the low-rank variant uses the Woodbury
    /// identity
    /// `(alpha I + U L U^T)^-1 = I/alpha - U (L^-1 + U^T U / alpha)^-1 U^T / alpha^2`
    /// with the `U^T U` term computed explicitly rather than assumed to be
    /// the identity.
    pub fn solve_shifted(
        &self,
        alpha: f64,
        rhs: &DVector<f64>,
    ) -> Result<DVector<f64>, SurrogateError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(SurrogateError::NonPositiveAlpha(alpha));
        }
        assert_eq!(rhs.len(), self.dim(), "rhs dimension mismatch");
        match self {
            HessianSurrogate::Exact { q } => cholesky_shifted_solve(q, alpha, rhs),
            HessianSurrogate::Shifted { q, sigma } => cholesky_shifted_solve(q, sigma + alpha, rhs),
            HessianSurrogate::AbsEig { u, lam } => {
                let mut y = u.transpose() * rhs;
                for i in 0..y.len() {
                    y[i] /= lam[i] + alpha;
                }
                Ok(u * y)
            }
            HessianSurrogate::LowRankAbs { u, lam } => {
                if lam.len() == 0 {
                    return Ok(rhs / alpha);
                }
                let ut_rhs = u.transpose() * rhs;
                let mut inner = u.transpose() * u / alpha;
                for i in 0..lam.len() {
                    inner[(i, i)] += 1.0 / lam[i];
                }
                let chol =
                    Cholesky::new(inner).ok_or(SurrogateError::IndefiniteSystem)?;
                let w = chol.solve(&ut_rhs);
                Ok(rhs / alpha - u * w / (alpha * alpha))
            }
        }
    }

    /// `B v` without forming the dense surrogate.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.dim());
        match self {
            HessianSurrogate::Exact { q } => q * v,
            HessianSurrogate::Shifted { q, sigma } => q * v + *sigma * v,
            HessianSurrogate::AbsEig { u, lam } | HessianSurrogate::LowRankAbs { u, lam } => {
                let mut y = u.transpose() * v;
                for i in 0..y.len() {
                    y[i] *= lam[i];
                }
                u * y
            }
        }
    }

    /// Dense form of `B`, for diagnostics and small-scale verification.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        match self {
            HessianSurrogate::Exact { q } => q.clone(),
            HessianSurrogate::Shifted { q, sigma } => {
                let mut b = q.clone();
                for i in 0..b.nrows() {
                    b[(i, i)] += sigma;
                }
                b
            }
            HessianSurrogate::AbsEig { u, lam } | HessianSurrogate::LowRankAbs { u, lam } => {
                let mut scaled = u.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= lam[j];
                }
                scaled * u.transpose()
            }
        }
    }

    /// Spectral-norm deviation `||B - Q||_2` from a reference matrix.
    pub fn deviation(&self, q: &DMatrix<f64>) -> f64 {
        assert_eq!(q.nrows(), self.dim());
        assert_eq!(q.ncols(), self.dim());
        let diff = self.reconstruct() - q;
        let diff = 0.5 * (&diff + diff.transpose());
        diff.symmetric_eigenvalues().abs().max()
    }
}

fn clamp_small(lam: f64, spectral: f64) -> f64 {
    if lam.abs() <= EIG_CLAMP_REL * spectral {
        0.0
    } else {
        lam
    }
}

fn cholesky_shifted_solve(
    q: &DMatrix<f64>,
    shift: f64,
    rhs: &DVector<f64>,
) -> Result<DVector<f64>, SurrogateError> {
    let mut m = q.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += shift;
    }
    let chol = Cholesky::new(m).ok_or(SurrogateError::IndefiniteSystem)?;
    Ok(chol.solve(rhs))
}
