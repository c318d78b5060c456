//! Small dense helpers shared by the bath diagonalizer and the oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// Components below this modulus are skipped when fixing the eigenvector phase.
const PHASE_PIVOT: f64 = 1e-10;

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues, unit eigenvectors as columns,
/// each column rotated so its first non-negligible component is real and positive.
pub(crate) fn hermitian_eigen(matrix: &DMatrix<Complex64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let n = matrix.nrows();
    let sym = hermitian_part(matrix);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let norm = v.norm();
        if norm > 0.0 {
            v /= Complex64::from(norm);
        }
        if let Some(pivot) = v.iter().find(|c| c.norm() > PHASE_PIVOT).copied() {
            let phase = pivot.conj() / pivot.norm();
            v *= phase;
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

pub(crate) fn hermitian_part(matrix: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (matrix + matrix.adjoint()) * Complex64::from(0.5)
}

/// `max |U^dagger U - I|` entrywise.
pub(crate) fn unitarity_residual(u: &DMatrix<Complex64>) -> f64 {
    let gram = u.adjoint() * u;
    max_abs_diff(&gram, &DMatrix::identity(u.ncols(), u.ncols()))
}

pub(crate) fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Squared norm of the projection of the (normalized) `state` onto the span of the orthonormal
/// `columns`. Equals `|<u|psi>|^2` for a single column.
pub fn subspace_fidelity(columns: &[DVector<Complex64>], state: &DVector<Complex64>) -> f64 {
    let norm2 = state.norm_squared();
    if norm2 == 0.0 {
        return 0.0;
    }
    columns
        .iter()
        .map(|u| u.dotc(state).norm_sqr())
        .sum::<f64>()
        / norm2
}

/// Induced 1-norm (max column sum).
pub(crate) fn norm_one(a: &DMatrix<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
