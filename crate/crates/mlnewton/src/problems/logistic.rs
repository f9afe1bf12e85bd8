//! L2-regularized logistic loss over a sparse dataset.

use nalgebra::{DMatrix, DVector};

use super::{sigmoid, softplus, weighted_gram, Dataset, Objective};

/// `f(x) = (1/m) sum_i log(1 + exp(-<a_i, x>)) + (lambda/2) ||x||^2`.
///
/// By default the labels stored in the dataset do not enter the loss; the
/// margin is the raw inner product. `labels_in_loss(true)` switches to the
/// conventional classification form with margins `b_i <a_i, x>`.
pub struct LogisticProblem {
    dataset: Dataset,
    lambda: f64,
    labels_in_loss: bool,
}

impl LogisticProblem {
    pub fn new(dataset: Dataset, lambda: f64) -> Self {
        assert!(!dataset.is_empty(), "need at least one data row");
        assert!(dataset.n_features() > 0, "need at least one feature");
        assert!(lambda >= 0.0 && lambda.is_finite());
        LogisticProblem {
            dataset,
            lambda,
            labels_in_loss: false,
        }
    }

    pub fn labels_in_loss(mut self, yes: bool) -> Self {
        self.labels_in_loss = yes;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn label_factor(&self, i: usize) -> f64 {
        if self.labels_in_loss {
            self.dataset.labels()[i]
        } else {
            1.0
        }
    }

    /// Per-row curvature weights `sigma(m_i) sigma(-m_i) b_i^2` with margin
    /// `m_i = b_i <a_i, x>`.
    fn curvature_weights(&self, x: &DVector<f64>) -> Vec<f64> {
        (0..self.dataset.len())
            .map(|i| {
                let b = self.label_factor(i);
                let m = b * self.dataset.row_dot(i, x);
                sigmoid(m) * sigmoid(-m) * b * b
            })
            .collect()
    }
}

impl Objective for LogisticProblem {
    fn dim(&self) -> usize {
        self.dataset.n_features()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.dim());
        let m = self.dataset.len() as f64;
        let loss: f64 = (0..self.dataset.len())
            .map(|i| softplus(-self.label_factor(i) * self.dataset.row_dot(i, x)))
            .sum();
        loss / m + 0.5 * self.lambda * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.dim());
        let m = self.dataset.len() as f64;
        let mut g = DVector::zeros(self.dim());
        for i in 0..self.dataset.len() {
            let b = self.label_factor(i);
            let margin = b * self.dataset.row_dot(i, x);
            let coeff = -sigmoid(-margin) * b / m;
            for &(j, v) in &self.dataset.rows()[i] {
                g[j] += coeff * v;
            }
        }
        g + self.lambda * x
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(x.len(), self.dim());
        let w = self.curvature_weights(x);
        weighted_gram(
            &self.dataset,
            &w,
            1.0 / self.dataset.len() as f64,
            self.lambda,
            None,
        )
    }

    fn hessian_submatrix(&self, x: &DVector<f64>, indices: &[usize]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.dim());
        let w = self.curvature_weights(x);
        weighted_gram(
            &self.dataset,
            &w,
            1.0 / self.dataset.len() as f64,
            self.lambda,
            Some(indices),
        )
    }
}
