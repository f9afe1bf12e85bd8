//! Nonlinear least squares on sigmoid outputs: a nonconvex data-fit problem.

use nalgebra::{DMatrix, DVector};

use super::{sigmoid, weighted_gram, Dataset, Objective};

/// `f(x) = (1/m) sum_i (b_i - phi(<a_i, x>))^2` with `phi(t) = 1/(1+e^-t)`.
///
/// The residual weighting makes the Hessian indefinite away from good fits,
/// which exercises the positive semidefinite surrogate constructions.
pub struct NllsProblem {
    dataset: Dataset,
}

impl NllsProblem {
    pub fn new(dataset: Dataset) -> Self {
        assert!(!dataset.is_empty(), "need at least one data row");
        assert!(dataset.n_features() > 0, "need at least one feature");
        NllsProblem { dataset }
    }

    /// Hessian weights `2 (phi'^2 - e phi'')` per row.
    fn curvature_weights(&self, x: &DVector<f64>) -> Vec<f64> {
        (0..self.dataset.len())
            .map(|i| {
                let z = self.dataset.row_dot(i, x);
                let phi = sigmoid(z);
                let d1 = phi * (1.0 - phi);
                let d2 = d1 * (1.0 - 2.0 * phi);
                let e = self.dataset.labels()[i] - phi;
                2.0 * (d1 * d1 - e * d2)
            })
            .collect()
    }
}

impl Objective for NllsProblem {
    fn dim(&self) -> usize {
        self.dataset.n_features()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.dim());
        let m = self.dataset.len() as f64;
        let sum: f64 = (0..self.dataset.len())
            .map(|i| {
                let e = self.dataset.labels()[i] - sigmoid(self.dataset.row_dot(i, x));
                e * e
            })
            .sum();
        sum / m
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.dim());
        let m = self.dataset.len() as f64;
        let mut g = DVector::zeros(self.dim());
        for i in 0..self.dataset.len() {
            let z = self.dataset.row_dot(i, x);
            let phi = sigmoid(z);
            let e = self.dataset.labels()[i] - phi;
            let coeff = -2.0 * e * phi * (1.0 - phi) / m;
            for &(j, v) in &self.dataset.rows()[i] {
                g[j] += coeff * v;
            }
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(x.len(), self.dim());
        let w = self.curvature_weights(x);
        weighted_gram(&self.dataset, &w, 1.0 / self.dataset.len() as f64, 0.0, None)
    }

    fn hessian_submatrix(&self, x: &DVector<f64>, indices: &[usize]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.dim());
        let w = self.curvature_weights(x);
        weighted_gram(
            &self.dataset,
            &w,
            1.0 / self.dataset.len() as f64,
            0.0,
            Some(indices),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_fit_has_zero_value() {
        let ds = Dataset::new(vec![vec![(0, 1.0)], vec![(1, 2.0)]], vec![0.5, 0.5], 2);
        let p = NllsProblem::new(ds);
        assert_eq!(p.value(&DVector::zeros(2)), 0.0);
    }

    #[test]
    fn hessian_can_be_indefinite() {
        // One row, a = (1), b = 1, x = -2: the residual term dominates the
        // Gauss-Newton term and the 1x1 Hessian goes negative.
        let ds = Dataset::new(vec![vec![(0, 1.0)]], vec![1.0], 1);
        let p = NllsProblem::new(ds);
        let h = p.hessian(&DVector::from_vec(vec![-2.0]));
        assert!(h[(0, 0)] < 0.0, "expected negative curvature, got {}", h[(0, 0)]);
    }

    #[test]
    fn submatrix_is_bitwise_slice_of_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = Dataset::synthetic(10, 25, &mut rng);
        let p = NllsProblem::new(ds);
        let x = DVector::from_fn(10, |_, _| rng.gen_range(-1.0..1.0));
        let full = p.hessian(&x);
        let s = [0usize, 3, 7];
        let sub = p.hessian_submatrix(&x, &s);
        for (pi, &gi) in s.iter().enumerate() {
            for (qi, &gq) in s.iter().enumerate() {
                assert_eq!(sub[(pi, qi)].to_bits(), full[(gi, gq)].to_bits());
            }
        }
    }

    #[test]
    fn hessian_matches_differenced_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ds = Dataset::synthetic(6, 20, &mut rng);
        let p = NllsProblem::new(ds);
        let x = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
        let h = p.hessian(&x);
        let step = 1e-6;
        for j in 0..6 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let col = (p.gradient(&xp) - p.gradient(&xm)) / (2.0 * step);
            for i in 0..6 {
                assert!(
                    (h[(i, j)] - col[i]).abs() <= 1e-6 * (1.0 + h[(i, j)].abs()),
                    "H[{i},{j}] = {} vs fd {}",
                    h[(i, j)],
                    col[i]
                );
            }
        }
    }
}
