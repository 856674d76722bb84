//! Small dense linear-algebra helpers over `nalgebra` complex matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{CrError, Result};

pub type C64 = Complex64;
pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;
pub type RVector = DVector<f64>;
pub type RMatrix = DMatrix<f64>;

pub const J: C64 = C64 { re: 0.0, im: 1.0 };

/// Largest entry modulus of a complex vector or matrix.
pub fn inf_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

pub fn inf_norm_vec(v: &CVector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

pub fn inf_norm_real(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn all_finite(v: &CVector) -> bool {
    v.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

pub fn all_finite_mat(m: &CMatrix) -> bool {
    m.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

pub fn conj_mat(m: &CMatrix) -> CMatrix {
    m.map(|x| x.conj())
}

pub fn conj_vec(v: &CVector) -> CVector {
    v.map(|x| x.conj())
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Hermitian symmetrization residual ‖M − Mᴴ‖∞.
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    inf_norm(&(m - m.adjoint()))
}

/// Cholesky pivots of the Hermitian part, or `None` when some pivot is not
/// real and positive. The complex factorization never fails on its own: a
/// negative pivot just gets an imaginary square root.
fn cholesky_pivots(m: &CMatrix) -> Option<Vec<f64>> {
    if m.nrows() != m.ncols() || !all_finite_mat(m) {
        return None;
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let l = Cholesky::new(herm)?.l();
    let d: Vec<C64> = (0..l.nrows()).map(|i| l[(i, i)]).collect();
    let max = d.iter().fold(0.0_f64, |acc, x| acc.max(x.norm()));
    let ok = d
        .iter()
        .all(|x| x.re > 1e-12 * max.max(f64::MIN_POSITIVE) && x.im.abs() <= 1e-12 * max);
    ok.then(|| d.iter().map(|x| x.re).collect())
}

/// Positive definiteness through a Cholesky attempt.
pub fn is_positive_definite(m: &CMatrix) -> bool {
    cholesky_pivots(m).is_some()
}

/// Condition estimate from the Cholesky diagonal; `f64::INFINITY` when the
/// matrix is not positive definite.
pub fn cholesky_condition_estimate(m: &CMatrix) -> f64 {
    match cholesky_pivots(m) {
        Some(d) if !d.is_empty() => {
            let max = d.iter().cloned().fold(0.0, f64::max);
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            (max / min).powi(2)
        }
        Some(_) => 1.0,
        None => f64::INFINITY,
    }
}

/// Relative pivot threshold below which an LU factorization is treated as singular.
pub const PIVOT_TOL: f64 = 1e-13;

/// Solves `m x = b` by partial-pivot LU; a pivot below `PIVOT_TOL` times the
/// largest pivot is reported as a singular factor named `which`.
pub fn solve_checked(m: &CMatrix, b: &CMatrix, which: &str) -> Result<CMatrix> {
    solve_checked_scaled(m, b, which, 0.0)
}

/// Like [`solve_checked`], but pivots are also compared against `scale`, the
/// magnitude of the matrix this one was derived from. A 1×1 Schur complement
/// that cancels to rounding noise is caught this way.
pub fn solve_checked_scaled(m: &CMatrix, b: &CMatrix, which: &str, scale: f64) -> Result<CMatrix> {
    if m.nrows() != m.ncols() || m.nrows() != b.nrows() {
        return Err(CrError::Dimension(format!(
            "cannot solve {}x{} system with {} right-hand rows",
            m.nrows(),
            m.ncols(),
            b.nrows()
        )));
    }
    let singular = || CrError::SingularMatrix {
        which: which.to_string(),
    };
    let lu = m.clone().lu();
    let u = lu.u();
    let pivots: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
    let max = pivots.iter().cloned().fold(0.0, f64::max);
    let min = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    let reference = max.max(scale);
    if m.nrows() > 0 && (max == 0.0 || min <= PIVOT_TOL * reference || !max.is_finite()) {
        return Err(singular());
    }
    lu.solve(b).ok_or_else(singular)
}

pub fn solve_vec_checked(m: &CMatrix, b: &CVector, which: &str) -> Result<CVector> {
    let bm = CMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = solve_checked(m, &bm, which)?;
    Ok(CVector::from_column_slice(x.as_slice()))
}

pub fn inverse_checked(m: &CMatrix, which: &str) -> Result<CMatrix> {
    solve_checked(m, &CMatrix::identity(m.nrows(), m.nrows()), which)
}

/// Ascending real eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::<C64, Dyn>::new(herm);
    let mut v: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn symmetric_eigenvalues(m: &RMatrix) -> Vec<f64> {
    let sym = (m + m.transpose()).scale(0.5);
    let eig = SymmetricEigen::<f64, Dyn>::new(sym);
    let mut v: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Descending singular values.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// Numerical rank from singular values relative to the largest one.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.first().cloned().unwrap_or(0.0);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Splits a 2n×2n matrix into its four n×n blocks (top-left, top-right,
/// bottom-left, bottom-right).
pub fn split_blocks(m: &CMatrix) -> (CMatrix, CMatrix, CMatrix, CMatrix) {
    let n = m.nrows() / 2;
    (
        m.view((0, 0), (n, n)).into_owned(),
        m.view((0, n), (n, n)).into_owned(),
        m.view((n, 0), (n, n)).into_owned(),
        m.view((n, n), (n, n)).into_owned(),
    )
}

pub fn join_blocks(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

pub fn stack(top: &CVector, bottom: &CVector) -> CVector {
    let mut v = CVector::zeros(top.len() + bottom.len());
    v.rows_mut(0, top.len()).copy_from(top);
    v.rows_mut(top.len(), bottom.len()).copy_from(bottom);
    v
}

pub fn row_to_col(m: &CMatrix) -> CVector {
    CVector::from_iterator(m.len(), m.iter().cloned())
}

/// Hermitian form vᴴ M w.
pub fn quad_form(v: &CVector, m: &CMatrix, w: &CVector) -> C64 {
    v.dotc(&(m * w))
}
