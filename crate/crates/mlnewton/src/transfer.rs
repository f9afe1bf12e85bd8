//! Restriction and prolongation between the fine space `R^N` and a coarse
//! space `R^n`.
//!
//! The workhorse operator keeps `n` distinct coordinate indices: restriction
//! gathers those entries (rows of the identity), prolongation scatters them
//! back, and the reduced Hessian is a principal submatrix pulled from the
//! objective without forming the full matrix. A dense variant exists for
//! tests and oracles where an arbitrary matrix `R` is convenient.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::problems::Objective;

#[derive(Debug, Error, PartialEq)]
pub enum TransferError {
    #[error("coarse dimension {n} invalid for fine dimension {fine} (need 1 <= n {bound} {fine})")]
    InvalidCoarseDim {
        n: usize,
        fine: usize,
        bound: &'static str,
    },
    #[error("indices must be strictly ascending and within the fine dimension: {0}")]
    BadIndices(String),
    #[error("cyclic schedule needs at least one index set")]
    EmptySchedule,
}

/// A linear map pair `(R, P = R^T)` with `R: R^N -> R^n`.
#[derive(Debug, Clone, PartialEq)]
pub enum TransferOperator {
    /// Rows of the identity on a sorted set of coordinate indices.
    Sampled { indices: Vec<usize>, fine_dim: usize },
    /// Arbitrary dense `n x N` matrix, for tests and oracles.
    Dense { r: DMatrix<f64>, omega: f64 },
}

impl TransferOperator {
    /// Draws `n` distinct indices uniformly without replacement and sorts
    /// them. Requires `1 <= n < fine_dim`; a full index set never arises
    /// from sampling (use [`TransferOperator::from_indices`] for that
    /// degenerate gather).
    pub fn sample_uniform(
        fine_dim: usize,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, TransferError> {
        if n == 0 || n >= fine_dim {
            return Err(TransferError::InvalidCoarseDim {
                n,
                fine: fine_dim,
                bound: "<",
            });
        }
        let mut indices = rand::seq::index::sample(rng, fine_dim, n).into_vec();
        indices.sort_unstable();
        Ok(TransferOperator::Sampled { indices, fine_dim })
    }

    /// Wraps an explicit sorted index set. `indices.len() == fine_dim` is
    /// allowed and yields the identity gather.
    pub fn from_indices(indices: Vec<usize>, fine_dim: usize) -> Result<Self, TransferError> {
        if indices.is_empty() || indices.len() > fine_dim {
            return Err(TransferError::InvalidCoarseDim {
                n: indices.len(),
                fine: fine_dim,
                bound: "<=",
            });
        }
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(TransferError::BadIndices(format!("{} then {}", w[0], w[1])));
            }
        }
        if *indices.last().unwrap() >= fine_dim {
            return Err(TransferError::BadIndices(format!(
                "{} >= {}",
                indices.last().unwrap(),
                fine_dim
            )));
        }
        Ok(TransferOperator::Sampled { indices, fine_dim })
    }

    pub fn identity(fine_dim: usize) -> Self {
        TransferOperator::from_indices((0..fine_dim).collect(), fine_dim)
            .expect("identity gather is always valid for fine_dim >= 1")
    }

    /// Wraps a dense restriction matrix; the operator-norm bound is computed
    /// from the spectrum of `R R^T`.
    pub fn dense(r: DMatrix<f64>) -> Self {
        assert!(r.nrows() >= 1 && r.nrows() <= r.ncols(), "need 1 <= n <= N");
        let gram = &r * r.transpose();
        let omega = gram.symmetric_eigenvalues().max().max(0.0).sqrt();
        TransferOperator::Dense { r, omega }
    }

    pub fn fine_dim(&self) -> usize {
        match self {
            TransferOperator::Sampled { fine_dim, .. } => *fine_dim,
            TransferOperator::Dense { r, .. } => r.ncols(),
        }
    }

    pub fn coarse_dim(&self) -> usize {
        match self {
            TransferOperator::Sampled { indices, .. } => indices.len(),
            TransferOperator::Dense { r, .. } => r.nrows(),
        }
    }

    /// Upper bound on both operator norms; exactly 1 for sampled operators.
    pub fn omega(&self) -> f64 {
        match self {
            TransferOperator::Sampled { .. } => 1.0,
            TransferOperator::Dense { omega, .. } => *omega,
        }
    }

    pub fn indices(&self) -> Option<&[usize]> {
        match self {
            TransferOperator::Sampled { indices, .. } => Some(indices),
            TransferOperator::Dense { .. } => None,
        }
    }

    /// `R v`: gather for sampled operators.
    pub fn restrict(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.fine_dim(), "fine-dimension mismatch");
        match self {
            TransferOperator::Sampled { indices, .. } => {
                DVector::from_iterator(indices.len(), indices.iter().map(|&i| v[i]))
            }
            TransferOperator::Dense { r, .. } => r * v,
        }
    }

    /// `P w = R^T w`: scatter for sampled operators.
    pub fn prolong(&self, w: &DVector<f64>) -> DVector<f64> {
        assert_eq!(w.len(), self.coarse_dim(), "coarse-dimension mismatch");
        match self {
            TransferOperator::Sampled { indices, fine_dim } => {
                let mut v = DVector::zeros(*fine_dim);
                for (j, &i) in indices.iter().enumerate() {
                    v[i] = w[j];
                }
                v
            }
            TransferOperator::Dense { r, .. } => r.transpose() * w,
        }
    }

    /// `R H(x) R^T` without forming `H` in the sampled case.
    pub fn reduced_hessian(&self, problem: &dyn Objective, x: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(x.len(), problem.dim());
        assert_eq!(self.fine_dim(), problem.dim(), "operator/problem mismatch");
        match self {
            TransferOperator::Sampled { indices, .. } => problem.hessian_submatrix(x, indices),
            TransferOperator::Dense { r, .. } => {
                let h = problem.hessian(x);
                r * h * r.transpose()
            }
        }
    }
}

/// The coarse-step gate: the restricted gradient must carry a `mu` fraction
/// of the full gradient and clear an absolute floor. Both strict.
pub fn admissible(reduced_grad_norm: f64, grad_norm: f64, mu: f64, eps: f64) -> bool {
    reduced_grad_norm > mu * grad_norm && reduced_grad_norm > eps
}

/// Where each iteration's operator comes from.
pub enum OperatorSchedule {
    /// Fresh uniform draw of `n` indices per iteration.
    Resample { n: usize, rng: ChaCha8Rng },
    /// A fixed list of index sets visited in order, wrapping around.
    Cyclic {
        sets: Vec<Vec<usize>>,
        pos: usize,
    },
    /// The same operator every iteration.
    Fixed(TransferOperator),
}

impl OperatorSchedule {
    pub fn resample(n: usize, rng: ChaCha8Rng) -> Self {
        OperatorSchedule::Resample { n, rng }
    }

    pub fn cyclic(sets: Vec<Vec<usize>>) -> Result<Self, TransferError> {
        if sets.is_empty() {
            return Err(TransferError::EmptySchedule);
        }
        Ok(OperatorSchedule::Cyclic { sets, pos: 0 })
    }

    pub fn next_operator(&mut self, fine_dim: usize) -> Result<TransferOperator, TransferError> {
        match self {
            OperatorSchedule::Resample { n, rng } => {
                TransferOperator::sample_uniform(fine_dim, *n, rng)
            }
            OperatorSchedule::Cyclic { sets, pos } => {
                let set = sets[*pos].clone();
                *pos = (*pos + 1) % sets.len();
                TransferOperator::from_indices(set, fine_dim)
            }
            OperatorSchedule::Fixed(op) => {
                if op.fine_dim() != fine_dim {
                    return Err(TransferError::InvalidCoarseDim {
                        n: op.coarse_dim(),
                        fine: fine_dim,
                        bound: "<=",
                    });
                }
                Ok(op.clone())
            }
        }
    }
}
