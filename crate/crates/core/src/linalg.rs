//! Dense solves used by the models.
//!
//! Symmetric systems go through Cholesky. A failed factorization gets one diagonal jitter
//! retry, then falls back to an eigen pseudo-inverse, so callers never see a singularity error.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative cutoff below which eigenvalues are treated as zero in pseudo-inverses.
const PINV_RTOL: f64 = 1e-12;

/// Jitter added to the diagonal on a failed Cholesky: `1e-10 * trace / dim`.
pub fn default_jitter(a: &DMatrix<f64>) -> f64 {
    let dim = a.nrows().max(1) as f64;
    let scale = a.trace() / dim;
    1e-10 * if scale > 0.0 { scale } else { 1.0 }
}

/// Outcome of a guarded symmetric solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolvePath {
    Cholesky,
    Jittered,
    PseudoInverse,
}

fn with_jitter(a: &DMatrix<f64>, jitter: f64) -> DMatrix<f64> {
    let mut out = a.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += jitter;
    }
    out
}

/// Moore-Penrose inverse of a symmetric matrix via its eigendecomposition.
pub fn symmetric_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = max * PINV_RTOL * n as f64;
    let inv: DVector<f64> = eig.eigenvalues.map(|v| if v.abs() > cutoff { 1.0 / v } else { 0.0 });
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&inv) * v.transpose()
}

/// Solves `a x = b` for symmetric positive (semi)definite `a`.
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, SolvePath) {
    if let Some(ch) = a.clone().cholesky() {
        return (ch.solve(b), SolvePath::Cholesky);
    }
    if let Some(ch) = with_jitter(a, default_jitter(a)).cholesky() {
        return (ch.solve(b), SolvePath::Jittered);
    }
    (symmetric_pinv(a) * b, SolvePath::PseudoInverse)
}

pub fn solve_symmetric_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, SolvePath) {
    let (x, path) = solve_symmetric(a, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()));
    (x.column(0).into_owned(), path)
}

/// Inverse of a symmetric positive (semi)definite matrix with the same fallbacks as
/// [`solve_symmetric`].
pub fn invert_symmetric(a: &DMatrix<f64>) -> (DMatrix<f64>, SolvePath) {
    let identity = DMatrix::identity(a.nrows(), a.ncols());
    let (mut inv, path) = solve_symmetric(a, &identity);
    symmetrize(&mut inv);
    (inv, path)
}

/// Inverse of `a + lambda I` for symmetric PSD `a`. With `lambda == 0` this is the
/// pseudo-inverse, which gives least-norm solutions for rank-deficient systems.
pub fn regularized_inverse(a: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    if lambda > 0.0 {
        let shifted = with_jitter(a, lambda);
        if let Some(ch) = shifted.clone().cholesky() {
            let mut inv = ch.inverse();
            symmetrize(&mut inv);
            return inv;
        }
        symmetric_pinv(&shifted)
    } else {
        symmetric_pinv(a)
    }
}

/// Ridge solution of `min |A x - b|^2 + lambda |x|^2`; least-norm least squares when
/// `lambda == 0`. Uses the smaller of the two normal-equation forms.
pub fn ridge_least_norm(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 {
        return DVector::zeros(cols);
    }
    if rows < cols {
        // x = A^T (A A^T + lambda I)^+ b
        let gram = a * a.transpose();
        a.transpose() * (regularized_inverse(&gram, lambda) * b)
    } else {
        let gram = a.transpose() * a;
        regularized_inverse(&gram, lambda) * (a.transpose() * b)
    }
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
