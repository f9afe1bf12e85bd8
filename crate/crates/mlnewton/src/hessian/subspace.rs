//! Subspace helpers: orthonormalization, randomized range finding, and a
//! Lanczos estimate of the smallest eigenvalue.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Modified Gram-Schmidt with re-orthogonalization. Columns whose residual
/// collapses (linearly dependent or zero input) are dropped, so the result
/// may have fewer columns than the input.
pub(crate) fn orthonormalize(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows();
    let scale = y
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(y.ncols());
    for col in y.column_iter() {
        let mut v: DVector<f64> = col.into_owned();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-13 * scale {
            basis.push(v / norm);
        }
    }
    if basis.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&basis)
}

/// Randomized subspace iteration for a symmetric matrix: returns an
/// orthonormal basis whose span captures the dominant eigenvectors of `q`
/// by absolute eigenvalue. `sketch_cols` counts the Gaussian probes.
pub(crate) fn randomized_range(
    q: &DMatrix<f64>,
    sketch_cols: usize,
    power_iters: usize,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let n = q.nrows();
    let l = sketch_cols.min(n).max(1);
    let omega = DMatrix::from_fn(n, l, |_, _| standard_normal(rng));
    let mut y = q * omega;
    for _ in 0..power_iters.saturating_sub(1) {
        let basis = orthonormalize(&y);
        if basis.ncols() == 0 {
            return basis;
        }
        y = q * basis;
    }
    orthonormalize(&y)
}

/// Box-Muller; two uniforms in, one normal out. Deterministic per rng state.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Lanczos with full reorthogonalization, returning the smallest Ritz pair
/// `(theta, v)` or `None` when the estimate cannot be certified.
///
/// The residual `||Q v - theta v||` bounds the eigenvalue error for
/// symmetric matrices, so callers can trust `theta` to the returned
/// tolerance or fall back to a dense decomposition.
pub(crate) fn lanczos_min_eig(q: &DMatrix<f64>, max_steps: usize, tol_rel: f64) -> Option<f64> {
    let n = q.nrows();
    if n == 0 {
        return None;
    }
    let steps = max_steps.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6c61_6e63);
    let mut v = DVector::from_fn(n, |_, _| standard_normal(&mut rng));
    v /= v.norm();
    let mut basis: Vec<DVector<f64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::new();
    let mut w = q * &v;
    for j in 0..steps {
        let alpha = basis[j].dot(&w);
        alphas.push(alpha);
        w.axpy(-alpha, &basis[j], 1.0);
        if j > 0 {
            let b = betas[j - 1];
            w.axpy(-b, &basis[j - 1], 1.0);
        }
        // Full reorthogonalization keeps the basis clean at this scale.
        for b in &basis {
            let c = b.dot(&w);
            w.axpy(-c, b, 1.0);
        }
        let beta = w.norm();
        if j + 1 == steps || beta < 1e-14 * alphas.iter().map(|a| a.abs()).fold(1.0, f64::max) {
            break;
        }
        betas.push(beta);
        v = &w / beta;
        basis.push(v.clone());
        w = q * &v;
    }
    let k = alphas.len();
    let mut tri = DMatrix::zeros(k, k);
    for i in 0..k {
        tri[(i, i)] = alphas[i];
        if i + 1 < k {
            tri[(i, i + 1)] = betas[i];
            tri[(i + 1, i)] = betas[i];
        }
    }
    let eig = tri.symmetric_eigen();
    let (mut arg, mut theta) = (0usize, f64::INFINITY);
    for (i, &val) in eig.eigenvalues.iter().enumerate() {
        if val < theta {
            theta = val;
            arg = i;
        }
    }
    let y = eig.eigenvectors.column(arg);
    let mut ritz = DVector::zeros(n);
    for (j, b) in basis.iter().enumerate() {
        ritz.axpy(y[j], b, 1.0);
    }
    ritz /= ritz.norm();
    let scale = eig
        .eigenvalues
        .iter()
        .map(|e| e.abs())
        .fold(f64::MIN_POSITIVE, f64::max);
    let residual = (q * &ritz - theta * &ritz).norm();
    if residual <= tol_rel * scale {
        Some(theta)
    } else {
        None
    }
}
