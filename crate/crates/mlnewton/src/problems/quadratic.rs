//! Synthetic quadratic objective, the closed-form reference problem.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{check_indices, Objective};

/// `f(x) = (1/2) x^T A x - b^T x` with symmetric `A`.
///
/// Its Hessian is constant, so adaptive Lipschitz estimates should settle at
/// their floors, and the minimizer solves `A x = b` exactly.
pub struct QuadraticProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl QuadraticProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "A must be square");
        assert_eq!(a.nrows(), b.len(), "A and b dimensions must agree");
        let asym = 0.5 * (&a - a.transpose()).norm();
        assert!(asym <= 1e-12 * (1.0 + a.norm()), "A must be symmetric");
        QuadraticProblem { a, b }
    }

    /// Random positive definite instance: a scaled Gram matrix plus a small
    /// ridge, with a random right-hand side.
    pub fn synthetic(dim: usize, rng: &mut impl Rng) -> Self {
        assert!(dim > 0);
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let mut a = (&g * g.transpose()) / dim as f64;
        for i in 0..dim {
            a[(i, i)] += 0.1;
        }
        let b = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        QuadraticProblem::new(a, b)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.dim());
        0.5 * (&self.a * x).dot(x) - self.b.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.dim());
        &self.a * x - &self.b
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(x.len(), self.dim());
        self.a.clone()
    }

    fn hessian_submatrix(&self, x: &DVector<f64>, indices: &[usize]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.dim());
        check_indices(indices, self.dim());
        DMatrix::from_fn(indices.len(), indices.len(), |i, j| {
            self.a[(indices[i], indices[j])]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn value_and_gradient_closed_form() {
        // f(x) = |x|^2/2 - 0 with A = I, b = 0: f(3,4) = 12.5, grad = x.
        let p = QuadraticProblem::new(DMatrix::identity(2, 2), DVector::zeros(2));
        let x = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(p.value(&x), 12.5);
        assert_eq!(p.gradient(&x), x);
    }

    #[test]
    fn submatrix_is_bitwise_slice() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let p = QuadraticProblem::synthetic(7, &mut rng);
        let x = DVector::zeros(7);
        let full = p.hessian(&x);
        let s = [0usize, 2, 6];
        let sub = p.hessian_submatrix(&x, &s);
        for (pi, &gi) in s.iter().enumerate() {
            for (qi, &gq) in s.iter().enumerate() {
                assert_eq!(sub[(pi, qi)].to_bits(), full[(gi, gq)].to_bits());
            }
        }
    }

    #[test]
    #[should_panic(expected = "symmetric")]
    fn asymmetric_matrix_rejected() {
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = 1.0;
        QuadraticProblem::new(a, DVector::zeros(2));
    }
}
