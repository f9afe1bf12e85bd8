//! Test objectives with analytic first and second derivatives.
//!
//! All problems expose the full dense Hessian and, more importantly for the
//! multilevel solvers, principal submatrices of it without ever forming the
//! full matrix. Derivatives are hand-derived closed forms; the finite
//! difference oracle in [`crate::verify`] cross-checks them in tests.

mod dataset;
mod logistic;
mod nlls;
mod quadratic;

pub use dataset::{parse_libsvm, parse_libsvm_file, Dataset, ParseError};
pub use logistic::LogisticProblem;
pub use nlls::NllsProblem;
pub use quadratic::QuadraticProblem;

use nalgebra::{DMatrix, DVector};

/// A smooth objective on `R^dim`.
///
/// Implementations panic on dimension mismatches (a caller bug, not a data
/// condition). Non-finite inputs propagate through to non-finite outputs and
/// are handled by the solvers' acceptance tests.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Dense Hessian. Intended for fine-level steps and verification at
    /// moderate dimension.
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// The principal submatrix of the Hessian on the given sorted index set,
    /// computed without forming the full Hessian. Must agree bitwise with
    /// slicing `hessian(x)`, so both paths accumulate the same products in
    /// the same order.
    fn hessian_submatrix(&self, x: &DVector<f64>, indices: &[usize]) -> DMatrix<f64>;
}

pub(crate) fn check_indices(indices: &[usize], dim: usize) {
    let mut prev: Option<usize> = None;
    for &i in indices {
        assert!(i < dim, "index {i} out of range for dimension {dim}");
        if let Some(p) = prev {
            assert!(i > p, "indices must be strictly ascending, got {p} then {i}");
        }
        prev = Some(i);
    }
}

/// Numerically stable sigmoid 1/(1+exp(-t)).
#[inline]
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable log(1 + exp(t)).
#[inline]
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Shared accumulation for data-fit Hessians of the form
/// `scale * sum_i w_i a_i a_i^T (+ ridge I)`.
///
/// `indices = None` produces the full matrix; `Some(s)` the principal
/// submatrix on the sorted set `s`. Both paths visit rows in data order and
/// accumulate identical products per entry, which keeps them bit-identical.
pub(crate) fn weighted_gram(
    dataset: &Dataset,
    weights: &[f64],
    scale: f64,
    ridge: f64,
    indices: Option<&[usize]>,
) -> DMatrix<f64> {
    let dim = dataset.n_features();
    let (n, pos): (usize, Option<Vec<usize>>) = match indices {
        None => (dim, None),
        Some(s) => {
            check_indices(s, dim);
            let mut lookup = vec![usize::MAX; dim];
            for (j, &i) in s.iter().enumerate() {
                lookup[i] = j;
            }
            (s.len(), Some(lookup))
        }
    };
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut local: Vec<(usize, f64)> = Vec::new();
    for (row, &w) in dataset.rows().iter().zip(weights) {
        local.clear();
        match &pos {
            None => local.extend(row.iter().copied()),
            Some(lookup) => local.extend(
                row.iter()
                    .filter(|(i, _)| lookup[*i] != usize::MAX)
                    .map(|&(i, v)| (lookup[i], v)),
            ),
        }
        // Upper triangle only; mirroring below keeps the matrix exactly
        // symmetric, and identical accumulation order keeps submatrices
        // bit-identical to slices of the full matrix.
        for (jj, &(p, ap)) in local.iter().enumerate() {
            let wap = w * ap;
            for &(q, aq) in &local[jj..] {
                h[(p, q)] += wap * aq;
            }
        }
    }
    h *= scale;
    if ridge != 0.0 {
        for j in 0..n {
            h[(j, j)] += ridge;
        }
    }
    for p in 0..n {
        for q in (p + 1)..n {
            h[(q, p)] = h[(p, q)];
        }
    }
    h
}
