//! Small dense helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn sorted_eigh(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of a complex Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &DMatrix<C64>) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigen-decomposition of a complex Hermitian matrix (unsorted).
pub fn hermitian_eigh(h: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(h.clone());
    (eig.eigenvalues, eig.eigenvectors)
}

pub fn max_asymmetry(h: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..h.nrows() {
        for j in 0..i {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    worst
}

pub fn ensure_symmetric(h: &DMatrix<f64>) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::InvalidArgument(format!(
            "matrix must be square, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let scale = h.amax().max(1.0);
    let asymmetry = max_asymmetry(h);
    if asymmetry > 1e-12 * scale {
        return Err(Error::NotHermitian { asymmetry });
    }
    Ok(())
}

/// Closest matrix with orthonormal columns (polar factor `U V^T` of the SVD).
pub fn orthonormalize_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    u * v_t
}

pub fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

pub fn to_matrix4(m: &DMatrix<C64>) -> Matrix4<C64> {
    assert_eq!((m.nrows(), m.ncols()), (4, 4));
    Matrix4::from_fn(|r, c| m[(r, c)])
}

pub fn kron4(a: &nalgebra::Matrix2<C64>, b: &nalgebra::Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Max elementwise modulus of `a - b`.
pub fn max_abs_diff4(a: &Matrix4<C64>, b: &Matrix4<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Deviation of `U^dagger U` from the identity.
pub fn unitarity_error(u: &Matrix4<C64>) -> f64 {
    max_abs_diff4(&(u.adjoint() * u), &Matrix4::identity())
}
