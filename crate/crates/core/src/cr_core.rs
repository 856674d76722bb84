//! Conjugate-coordinate algebra.
//!
//! A point of 𝒵 = ℂⁿ has three equivalent representations: the complex
//! vector `z`, the real vector `r = col(x, y)` of ℝ²ⁿ and the conjugate
//! coordinates `c = col(z, z̄)` living in the 2n-dimensional real subspace
//! 𝒞 ⊂ ℂ²ⁿ. The structure matrices
//!
//! ```text
//!     J = [ I  jI ]      S = [ 0  I ]      C = [ I   0 ]
//!         [ I -jI ]          [ I  0 ]          [ 0  -I ]
//! ```
//!
//! relate them (`c = J r`, `r = ½ Jᴴ c`, `c̄ = S c`). Dense forms of the
//! three matrices are only built on request; the `apply_*` functions act
//! blockwise.

use crate::error::{CrError, Result};
use crate::linalg::{
    conj_vec, inf_norm, inf_norm_vec, inverse_checked, is_positive_definite, quad_form,
    CMatrix, CVector, RMatrix, RVector, C64, J,
};
use crate::wirtinger::{jacobians_fd, FnVectorField, VectorField};

/// Default absolute ∞-norm tolerance for admissibility tests.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

/// A point `z ∈ ℂⁿ` with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPoint {
    z: CVector,
}

impl ComplexPoint {
    pub fn new(z: CVector) -> Result<Self> {
        if !crate::linalg::all_finite(&z) {
            return Err(CrError::NonFiniteEvaluation {
                context: "ComplexPoint coordinates".into(),
            });
        }
        Ok(Self { z })
    }

    pub fn from_slice(z: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(z))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            z: CVector::zeros(n),
        }
    }

    pub fn z(&self) -> &CVector {
        &self.z
    }

    pub fn into_inner(self) -> CVector {
        self.z
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// `r = col(x, y) ∈ ℝ²ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealCoordinates {
    pub r: RVector,
}

/// `c = col(z, z̄)`; always admissible when built through this module.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateCoordinates {
    c: CVector,
}

impl ConjugateCoordinates {
    /// Builds `col(z, z̄)` from the top half only; admissible by construction.
    pub fn from_z(z: &CVector) -> Self {
        Self {
            c: crate::linalg::stack(z, &conj_vec(z)),
        }
    }

    /// Validates an arbitrary 2n vector against `c̄ = S c`.
    pub fn new(c: CVector, tol: f64) -> Result<Self> {
        let residual = admissibility_residual_vector(&c)?;
        if residual > tol {
            return Err(CrError::InadmissibleVector { residual, tol });
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> &CVector {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.c.len() / 2
    }

    /// Top block `z`.
    pub fn z(&self) -> CVector {
        self.c.rows(0, self.n()).into_owned()
    }
}

pub fn to_real(p: &ComplexPoint) -> RealCoordinates {
    let n = p.dim();
    let mut r = RVector::zeros(2 * n);
    for (i, zi) in p.z.iter().enumerate() {
        r[i] = zi.re;
        r[n + i] = zi.im;
    }
    RealCoordinates { r }
}

pub fn to_complex(r: &RealCoordinates) -> Result<ComplexPoint> {
    if !r.r.len().is_multiple_of(2) {
        return Err(CrError::Dimension(format!(
            "real coordinate vector has odd length {}",
            r.r.len()
        )));
    }
    let n = r.r.len() / 2;
    ComplexPoint::new(CVector::from_fn(n, |i, _| C64::new(r.r[i], r.r[n + i])))
}

/// `c = J r` where `r = to_real(p)`.
pub fn to_conjugate(p: &ComplexPoint) -> ConjugateCoordinates {
    let r = to_real(p);
    ConjugateCoordinates {
        c: apply_j(&r.r),
    }
}

/// `z` from conjugate coordinates via `r = ½ Jᴴ c`; rejects inadmissible input.
pub fn from_conjugate(c: &CVector, tol: f64) -> Result<ComplexPoint> {
    let residual = admissibility_residual_vector(c)?;
    if residual > tol {
        return Err(CrError::InadmissibleVector { residual, tol });
    }
    let r = apply_j_inverse(c);
    to_complex(&RealCoordinates {
        r: r.map(|x| x.re),
    })
}

/// `J r` evaluated blockwise: `col(x + j y, x − j y)`.
pub fn apply_j(r: &RVector) -> CVector {
    let n = r.len() / 2;
    CVector::from_fn(2 * n, |i, _| {
        if i < n {
            C64::new(r[i], r[n + i])
        } else {
            C64::new(r[i - n], -r[i])
        }
    })
}

/// `½ Jᴴ c` evaluated blockwise: `col((u + v)/2, j(v − u)/2)` for `c = col(u, v)`.
///
/// The result is complex in general; it is real exactly when `c` is admissible.
pub fn apply_j_inverse(c: &CVector) -> CVector {
    let n = c.len() / 2;
    CVector::from_fn(2 * n, |i, _| {
        if i < n {
            (c[i] + c[n + i]) * 0.5
        } else {
            (c[i] - c[i - n]) * J * 0.5
        }
    })
}

fn check_even(len: usize) -> Result<usize> {
    if !len.is_multiple_of(2) {
        return Err(CrError::Dimension(format!(
            "expected an even dimension, got {len}"
        )));
    }
    Ok(len / 2)
}

/// `S v`: exchanges the top and bottom n-blocks of a 2n vector.
pub fn swap(v: &CVector) -> Result<CVector> {
    let n = check_even(v.len())?;
    Ok(CVector::from_fn(2 * n, |i, _| v[(i + n) % (2 * n)]))
}

/// `S M`: exchanges the top and bottom row blocks.
pub fn swap_rows(m: &CMatrix) -> Result<CMatrix> {
    let n = check_even(m.nrows())?;
    Ok(CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        m[((i + n) % (2 * n), j)]
    }))
}

/// `M S`: exchanges the left and right column blocks.
pub fn swap_cols(m: &CMatrix) -> Result<CMatrix> {
    let n = check_even(m.ncols())?;
    Ok(CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        m[(i, (j + n) % (2 * n))]
    }))
}

/// `S M S`: exchanges all four blocks of a square 2n×2n matrix.
pub fn sandwich(m: &CMatrix) -> Result<CMatrix> {
    check_square_even(m)?;
    let n = m.nrows() / 2;
    Ok(CMatrix::from_fn(2 * n, 2 * n, |i, j| {
        m[((i + n) % (2 * n), (j + n) % (2 * n))]
    }))
}

fn check_square_even(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(CrError::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    check_even(m.nrows()).map(|_| ())
}

/// ‖b̄ − S b‖∞.
pub fn admissibility_residual_vector(b: &CVector) -> Result<f64> {
    let n = check_even(b.len())?;
    let mut res: f64 = 0.0;
    for i in 0..n {
        res = res.max((b[i].conj() - b[n + i]).norm());
    }
    Ok(res)
}

pub fn is_admissible_vector(b: &CVector, tol: f64) -> Result<bool> {
    Ok(admissibility_residual_vector(b)? <= tol)
}

/// ‖M − S M̄ S‖∞.
pub fn admissibility_residual_matrix(m: &CMatrix) -> Result<f64> {
    check_square_even(m)?;
    let n = m.nrows() / 2;
    let mut res: f64 = 0.0;
    for i in 0..2 * n {
        for j in 0..2 * n {
            let mirrored = m[((i + n) % (2 * n), (j + n) % (2 * n))].conj();
            res = res.max((m[(i, j)] - mirrored).norm());
        }
    }
    Ok(res)
}

pub fn is_admissible_matrix(m: &CMatrix, tol: f64) -> Result<bool> {
    Ok(admissibility_residual_matrix(m)? <= tol)
}

/// The admissibilization map `P(M) = (M + S M̄ S)/2`.
///
/// Idempotent and fixes exactly the admissible matrices. It is not claimed to
/// be an orthogonal projector.
pub fn project_admissible(m: &CMatrix) -> Result<CMatrix> {
    let mirrored = sandwich(m)?.map(|x| x.conj());
    Ok((m + mirrored).scale(0.5))
}

/// Dense structure matrices for dimension `n`, used by tests and checkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureMatrices {
    pub n: usize,
}

impl StructureMatrices {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn j(&self) -> CMatrix {
        let n = self.n;
        let one = C64::new(1.0, 0.0);
        CMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let (br, bc) = (r / n.max(1), c / n.max(1));
            if r % n != c % n {
                return C64::new(0.0, 0.0);
            }
            match (br, bc) {
                (0, 0) | (1, 0) => one,
                (0, 1) => J,
                _ => -J,
            }
        })
    }

    /// `J⁻¹ = ½ Jᴴ`, never through general inversion.
    pub fn j_inverse(&self) -> CMatrix {
        self.j().adjoint().scale(0.5)
    }

    pub fn s(&self) -> RMatrix {
        let n = self.n;
        RMatrix::from_fn(2 * n, 2 * n, |r, c| if (r + n) % (2 * n) == c { 1.0 } else { 0.0 })
    }

    pub fn c(&self) -> RMatrix {
        let n = self.n;
        RMatrix::from_fn(2 * n, 2 * n, |r, c| {
            if r != c {
                0.0
            } else if r < n {
                1.0
            } else {
                -1.0
            }
        })
    }

    pub fn s_complex(&self) -> CMatrix {
        crate::linalg::to_complex(&self.s())
    }

    pub fn c_complex(&self) -> CMatrix {
        crate::linalg::to_complex(&self.c())
    }

    /// Determinant of the dense `S`, computed by LU.
    pub fn det_s(&self) -> f64 {
        self.s().determinant()
    }
}

/// A constant Hermitian positive-definite metric `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    omega: CMatrix,
}

impl MetricTensor {
    pub fn new(omega: CMatrix) -> Result<Self> {
        if omega.nrows() != omega.ncols() {
            return Err(CrError::Dimension("metric tensor must be square".into()));
        }
        let scale = inf_norm(&omega).max(1.0);
        let res = crate::linalg::hermitian_residual(&omega);
        if res > 1e-10 * scale {
            return Err(CrError::InvalidArgument(format!(
                "metric tensor is not Hermitian (residual {res:.3e})"
            )));
        }
        let omega = (&omega + omega.adjoint()).scale(0.5);
        if !is_positive_definite(&omega) {
            return Err(CrError::SingularMatrix {
                which: "metric tensor is not positive definite".into(),
            });
        }
        Ok(Self { omega })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            omega: CMatrix::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    /// ⟨v₁, v₂⟩ = v₁ᴴ Ω v₂.
    pub fn inner(&self, v1: &CVector, v2: &CVector) -> C64 {
        quad_form(v1, &self.omega, v2)
    }
}

/// Residuals of the coordinate-change laws under `ξ = A z`.
#[derive(Debug, Clone)]
pub struct TransformLawReport {
    /// ‖(ξ(z + t v) − ξ(z − t v))/2t − A v‖∞ over probe vectors.
    pub vector_residual: f64,
    /// ‖∂F/∂ξ − ∂f/∂z · A⁻¹‖∞ for a holomorphic probe function, `F = f∘A⁻¹`.
    pub cogradient_residual: f64,
    /// Transformed metric `Ω_ξ = A⁻ᴴ Ω A⁻¹`.
    pub omega_xi: CMatrix,
    /// |⟨A v₁, A v₂⟩_{Ω_ξ} − ⟨v₁, v₂⟩_Ω|.
    pub inner_product_residual: f64,
}

impl TransformLawReport {
    pub fn max_residual(&self) -> f64 {
        self.vector_residual
            .max(self.cogradient_residual)
            .max(self.inner_product_residual)
    }
}

fn probe_vectors(n: usize) -> (CVector, CVector) {
    let v1 = CVector::from_fn(n, |i, _| C64::new(1.0 + i as f64 * 0.5, 0.25 - i as f64 * 0.1));
    let v2 = CVector::from_fn(n, |i, _| C64::new((i as f64 * 0.7).cos(), (i as f64 + 1.0).sin()));
    (v1, v2)
}

/// Checks the vector, cogradient and metric transformation laws for the
/// linear holomorphic change of coordinates `ξ = A z`.
pub fn verify_transform_laws(
    a: &CMatrix,
    p: &ComplexPoint,
    omega: &MetricTensor,
) -> Result<TransformLawReport> {
    let (v1, v2) = probe_vectors(p.dim());
    verify_transform_laws_with(a, p, omega, &v1, &v2)
}

pub fn verify_transform_laws_with(
    a: &CMatrix,
    p: &ComplexPoint,
    omega: &MetricTensor,
    v1: &CVector,
    v2: &CVector,
) -> Result<TransformLawReport> {
    let n = p.dim();
    if a.nrows() != n || a.ncols() != n || omega.dim() != n || v1.len() != n || v2.len() != n {
        return Err(CrError::Dimension(
            "transform, point, metric and probe vectors must share dimension n".into(),
        ));
    }
    let a_inv = inverse_checked(a, "coordinate transform A")?;

    // Vector law: the pushforward of v is the directional derivative of ξ(z).
    let t = 1e-3;
    let mut vector_residual: f64 = 0.0;
    for v in [v1, v2] {
        let plus = a * (p.z() + v.scale(t));
        let minus = a * (p.z() - v.scale(t));
        let fd = (plus - minus).unscale(2.0 * t);
        vector_residual = vector_residual.max(inf_norm_vec(&(fd - a * v)));
    }

    // Cogradient law on f(z) = Σ_k (k+1) z_k² + z_k³/3, holomorphic.
    let f_z = |z: &CVector| -> C64 {
        z.iter()
            .enumerate()
            .map(|(k, zk)| zk * zk * (k as f64 + 1.0) + zk * zk * zk / 3.0)
            .sum()
    };
    let df_dz = CMatrix::from_fn(1, n, |_, k| {
        let zk = p.z()[k];
        zk * 2.0 * (k as f64 + 1.0) + zk * zk
    });
    let a_inv_owned = a_inv.clone();
    let pulled = FnVectorField::new(n, 1, move |xi: &CVector| {
        let z = &a_inv_owned * xi;
        CVector::from_element(1, f_z(&z))
    });
    let xi = ComplexPoint::new(a * p.z())?;
    let jac = jacobians_fd(&pulled as &dyn VectorField, &xi, None)?;
    let expected = &df_dz * &a_inv;
    let cogradient_residual = inf_norm(&(&jac.j - expected));

    // Metric law.
    let omega_xi = a_inv.adjoint() * omega.matrix() * &a_inv;
    let w1 = a * v1;
    let w2 = a * v2;
    let inner_z = omega.inner(v1, v2);
    let inner_xi = quad_form(&w1, &omega_xi, &w2);
    let inner_product_residual = (inner_z - inner_xi).norm();

    Ok(TransformLawReport {
        vector_residual,
        cogradient_residual,
        omega_xi,
        inner_product_residual,
    })
}

/// Dense helper: `½ Jᴴ S J`, which equals `C`.
pub fn c_from_j(n: usize) -> CMatrix {
    let sm = StructureMatrices::new(n);
    (sm.j().adjoint() * sm.s_complex() * sm.j()).scale(0.5)
}

/// Dense helper: `½ Jᵀ S J`, which equals the identity.
pub fn identity_from_j(n: usize) -> CMatrix {
    let sm = StructureMatrices::new(n);
    (sm.j().transpose() * sm.s_complex() * sm.j()).scale(0.5)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inf_norm_real;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn to_real_examples() {
        let p = ComplexPoint::from_slice(&[c(1.0, 2.0)]).unwrap();
        assert_eq!(to_real(&p).r.as_slice(), &[1.0, 2.0]);
        let p = ComplexPoint::zeros(3);
        assert_eq!(to_real(&p).r, RVector::zeros(6));
        let p = ComplexPoint::from_slice(&[c(3.0, -1.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(to_real(&p).r.as_slice(), &[3.0, 0.0, -1.0, 1.0]);
        assert_eq!(to_complex(&to_real(&p)).unwrap(), p);
    }

    #[test]
    fn rejects_non_finite_points() {
        assert!(ComplexPoint::from_slice(&[c(f64::NAN, 0.0)]).is_err());
        assert!(ComplexPoint::from_slice(&[c(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn to_conjugate_examples() {
        let p = ComplexPoint::from_slice(&[c(1.0, 2.0)]).unwrap();
        let cc = to_conjugate(&p);
        assert_eq!(cc.c().as_slice(), &[c(1.0, 2.0), c(1.0, -2.0)]);
        let bad = CVector::from_column_slice(&[c(1.0, 1.0), c(1.0, 1.0)]);
        assert!(matches!(
            from_conjugate(&bad, ADMISSIBILITY_TOL),
            Err(CrError::InadmissibleVector { .. })
        ));
        assert!(ConjugateCoordinates::new(bad, ADMISSIBILITY_TOL).is_err());
    }

    #[test]
    fn half_jh_j_round_trip_against_dense_product() {
        let r = RVector::from_column_slice(&[0.3, -1.7, 2.2, 0.9]);
        let sm = StructureMatrices::new(2);
        let dense_c = sm.j() * crate::linalg::to_complex(&RMatrix::from_column_slice(4, 1, r.as_slice()));
        let c_vec = apply_j(&r);
        for i in 0..4 {
            assert!((dense_c[(i, 0)] - c_vec[i]).norm() < 1e-15);
        }
        let back = sm.j_inverse() * dense_c;
        for i in 0..4 {
            assert!((back[(i, 0)] - c(r[i], 0.0)).norm() < 1e-15);
        }
        let p = to_complex(&RealCoordinates { r: r.clone() }).unwrap();
        let q = from_conjugate(to_conjugate(&p).c(), ADMISSIBILITY_TOL).unwrap();
        assert!(inf_norm_vec(&(q.z() - p.z())) < 1e-15);
    }

    #[test]
    fn admissible_vector_examples() {
        let v = |a: C64, b: C64| CVector::from_column_slice(&[a, b]);
        assert!(is_admissible_vector(&v(c(1., 1.), c(1., -1.)), 1e-9).unwrap());
        assert!(!is_admissible_vector(&v(c(1., 1.), c(1., 1.)), 1e-9).unwrap());
        assert!(is_admissible_vector(&v(c(0., 0.), c(0., 0.)), 1e-9).unwrap());
        let odd = CVector::from_column_slice(&[c(1., 0.), c(1., 0.), c(0., 0.)]);
        assert!(matches!(
            is_admissible_vector(&odd, 1e-9),
            Err(CrError::Dimension(_))
        ));
    }

    #[test]
    fn admissible_matrix_examples() {
        assert!(is_admissible_matrix(&CMatrix::identity(4, 4), 1e-9).unwrap());
        let a = c(1.0, 1.0);
        let b = c(2.0, 0.0);
        let m = CMatrix::from_row_slice(2, 2, &[a, b, b.conj(), a.conj()]);
        assert!(is_admissible_matrix(&m, 1e-9).unwrap());
        let m = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        assert!(!is_admissible_matrix(&m, 1e-9).unwrap());
        assert!(is_admissible_matrix(&CMatrix::identity(3, 3), 1e-9).is_err());
        assert!(is_admissible_matrix(&CMatrix::zeros(2, 4), 1e-9).is_err());
    }

    #[test]
    fn projector_examples() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        let p = project_admissible(&m).unwrap();
        assert!(inf_norm(&(p - CMatrix::identity(2, 2).scale(0.5))) < 1e-16);

        let a = c(1.0, 1.0);
        let b = c(2.0, 0.0);
        let adm = CMatrix::from_row_slice(2, 2, &[a, b, b.conj(), a.conj()]);
        assert_eq!(project_admissible(&adm).unwrap(), adm);

        // GᴴG for g = αz + βz̄.
        let (al, be) = (c(0.7, -1.2), c(0.4, 0.9));
        let g = CMatrix::from_row_slice(1, 2, &[al, be]);
        let p = project_admissible(&(g.adjoint() * &g)).unwrap();
        let d = al.norm_sqr() + be.norm_sqr();
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[c(d, 0.), al.conj() * be * 2.0, al * be.conj() * 2.0, c(d, 0.)],
        )
        .scale(0.5);
        assert!(inf_norm(&(p - expected)) < 1e-15);
    }

    #[test]
    fn swap_examples() {
        let v = CVector::from_column_slice(&[c(1., 0.), c(2., 0.), c(3., 1.), c(4., 0.)]);
        assert_eq!(
            swap(&v).unwrap().as_slice(),
            &[c(3., 1.), c(4., 0.), c(1., 0.), c(2., 0.)]
        );
        assert_eq!(swap(&swap(&v).unwrap()).unwrap(), v);
        let m = CMatrix::from_fn(4, 4, |i, j| c(i as f64, j as f64));
        let s = StructureMatrices::new(2).s_complex();
        assert_eq!(sandwich(&m).unwrap(), &s * &m * &s);
        assert_eq!(swap_rows(&m).unwrap(), &s * &m);
        assert_eq!(swap_cols(&m).unwrap(), &m * &s);
        assert_eq!(StructureMatrices::new(2).det_s().round(), 1.0);
        assert_eq!(StructureMatrices::new(3).det_s().round(), -1.0);
    }

    #[test]
    fn structure_identities_small() {
        for n in 1..=4 {
            let sm = StructureMatrices::new(n);
            let s = sm.s();
            assert_eq!(&s * &s, RMatrix::identity(2 * n, 2 * n));
            assert_eq!(&sm.c() * &sm.c(), RMatrix::identity(2 * n, 2 * n));
            assert_eq!(s.transpose(), s);
            assert!(inf_norm(&(c_from_j(n) - sm.c_complex())) < 1e-14);
            assert!(inf_norm(&(identity_from_j(n) - CMatrix::identity(2 * n, 2 * n))) < 1e-14);
            assert!(inf_norm_real(&(sm.c().transpose() - sm.c())) == 0.0);
        }
    }

    #[test]
    fn transform_law_examples() {
        let p = ComplexPoint::from_slice(&[c(0.3, -0.2), c(-0.5, 0.4)]).unwrap();
        let eye = CMatrix::identity(2, 2);
        let r = verify_transform_laws(&eye, &p, &MetricTensor::identity(2)).unwrap();
        assert!(r.max_residual() < 1e-8, "{r:?}");

        let two = eye.scale(2.0);
        let r = verify_transform_laws(&two, &p, &MetricTensor::identity(2)).unwrap();
        assert!(inf_norm(&(r.omega_xi.clone() - eye.scale(0.25))) < 1e-15);
        assert!(r.inner_product_residual < 1e-12);
        assert!(r.cogradient_residual < 1e-7);

        // Unitary: a rotation with a phase.
        let (ct, st) = (0.6_f64, 0.8_f64);
        let u = CMatrix::from_row_slice(
            2,
            2,
            &[c(ct, 0.), c(-st, 0.), c(0., st), c(0., ct)],
        );
        let r = verify_transform_laws(&u, &p, &MetricTensor::identity(2)).unwrap();
        assert!(inf_norm(&(r.omega_xi.clone() - eye)) < 1e-14);

        let singular = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(2., 0.), c(2., 0.), c(4., 0.)]);
        assert!(matches!(
            verify_transform_laws(&singular, &p, &MetricTensor::identity(2)),
            Err(CrError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn metric_tensor_validation() {
        let bad = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(2., 0.), c(0., 0.), c(1., 0.)]);
        assert!(MetricTensor::new(bad).is_err());
        let indefinite = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]);
        assert!(MetricTensor::new(indefinite).is_err());
    }

    fn arb_point(max_n: usize) -> impl Strategy<Value = CVector> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), n)
                .prop_map(|v| CVector::from_iterator(v.len(), v.into_iter().map(|(a, b)| C64::new(a, b))))
        })
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 4 * n * n).prop_map(move |v| {
            CMatrix::from_iterator(2 * n, 2 * n, v.into_iter().map(|(a, b)| C64::new(a, b)))
        })
    }

    proptest! {
        #[test]
        fn conjugate_coordinates_are_admissible(z in arb_point(8)) {
            let p = ComplexPoint::new(z).unwrap();
            let cc = to_conjugate(&p);
            prop_assert!(is_admissible_vector(cc.c(), ADMISSIBILITY_TOL).unwrap());
            let back = from_conjugate(cc.c(), ADMISSIBILITY_TOL).unwrap();
            prop_assert!(inf_norm_vec(&(back.z() - p.z())) <= 1e-14);
        }

        #[test]
        fn projector_is_idempotent(m in (1usize..=4).prop_flat_map(arb_matrix)) {
            let p1 = project_admissible(&m).unwrap();
            let p2 = project_admissible(&p1).unwrap();
            prop_assert!(inf_norm(&(&p2 - &p1)) <= 1e-14);
            prop_assert!(is_admissible_matrix(&p1, 1e-12).unwrap());
        }
    }
}
