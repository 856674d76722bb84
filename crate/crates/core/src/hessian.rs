//! Second-order CR calculus for real scalar fields.
//!
//! For real `f` the four blocks are
//!
//! ```text
//!     H_zz  = ∂/∂z (∂f/∂z)ᴴ     H_z̄z  = ∂/∂z̄ (∂f/∂z)ᴴ
//!     H_zz̄  = ∂/∂z (∂f/∂z̄)ᴴ     H_z̄z̄  = ∂/∂z̄ (∂f/∂z̄)ᴴ
//! ```
//!
//! and `H^ℂ = [[H_zz, H_z̄z], [H_zz̄, H_z̄z̄]]`.

use rayon::prelude::*;

use crate::cr_core::{project_admissible, sandwich, swap_rows, ComplexPoint};
use crate::error::{CrError, Result};
use crate::linalg::{
    all_finite_mat, inf_norm, inf_norm_real, join_blocks, split_blocks, CMatrix, CVector, RMatrix, C64,
    J,
};
use crate::wirtinger::{cogradients_fd, first_order_terms, cogradients, ScalarField, WirtingerPair};

pub const SYM_TOL_FD: f64 = 1e-4;
pub const SYM_TOL_ANALYTIC: f64 = 1e-8;
/// Relative tolerance for the `H_rr ↔ H^ℂ` relations checked by [`assemble`].
pub const REL_TOL: f64 = 1e-10;

/// Raw Hessian blocks as supplied by a field or computed numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlocks {
    pub hzz: CMatrix,
    pub hzbz: CMatrix,
    pub hzzb: CMatrix,
    pub hzbzb: CMatrix,
}

impl HessianBlocks {
    pub fn hc(&self) -> CMatrix {
        join_blocks(&self.hzz, &self.hzbz, &self.hzzb, &self.hzbzb)
    }

    pub fn from_hc(hc: &CMatrix) -> Self {
        let (hzz, hzbz, hzzb, hzbzb) = split_blocks(hc);
        Self {
            hzz,
            hzbz,
            hzzb,
            hzbzb,
        }
    }

    /// Blocks of a constant real quadratic form, built from `H_zz` and `H_z̄z`.
    pub fn from_upper(hzz: CMatrix, hzbz: CMatrix) -> Self {
        let hzzb = hzbz.adjoint();
        let hzbzb = hzz.map(|x| x.conj());
        Self {
            hzz,
            hzbz,
            hzzb,
            hzbzb,
        }
    }

    pub fn dim(&self) -> usize {
        self.hzz.nrows()
    }
}

/// The four blocks after symmetrization, with the residual measured before it.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianQuad {
    pub hzz: CMatrix,
    pub hzbz: CMatrix,
    pub hzzb: CMatrix,
    pub hzbzb: CMatrix,
    /// max(‖H − Hᴴ‖∞, ‖H − S H̄ S‖∞) / max(1, ‖H‖∞) on the raw blocks.
    pub presym_residual: f64,
}

impl HessianQuad {
    /// Symmetrizes raw blocks; rejects them when the relative residual exceeds `tol`.
    pub fn from_blocks(b: HessianBlocks, tol: f64) -> Result<Self> {
        let n = b.dim();
        for m in [&b.hzz, &b.hzbz, &b.hzzb, &b.hzbzb] {
            if m.shape() != (n, n) {
                return Err(CrError::Dimension("Hessian blocks must all be n×n".into()));
            }
            if !all_finite_mat(m) {
                return Err(CrError::NonFiniteEvaluation {
                    context: "Hessian block".into(),
                });
            }
        }
        let hc = b.hc();
        let scale = inf_norm(&hc).max(1.0);
        let herm = inf_norm(&(&hc - hc.adjoint()));
        let adm = inf_norm(&(&hc - sandwich(&hc)?.map(|x| x.conj())));
        let presym_residual = herm.max(adm) / scale;
        if presym_residual > tol {
            return Err(CrError::SymmetryViolation {
                residual: presym_residual,
                tol,
            });
        }
        let sym = project_admissible(&(&hc + hc.adjoint()).scale(0.5))?;
        let (hzz, hzbz, hzzb, hzbzb) = split_blocks(&sym);
        Ok(Self {
            hzz,
            hzbz,
            hzzb,
            hzbzb,
            presym_residual,
        })
    }

    pub fn dim(&self) -> usize {
        self.hzz.nrows()
    }

    pub fn hc(&self) -> CMatrix {
        join_blocks(&self.hzz, &self.hzbz, &self.hzzb, &self.hzbzb)
    }

    pub fn blocks(&self) -> HessianBlocks {
        HessianBlocks {
            hzz: self.hzz.clone(),
            hzbz: self.hzbz.clone(),
            hzzb: self.hzzb.clone(),
            hzbzb: self.hzbzb.clone(),
        }
    }

    /// Largest violation among the six block identities.
    pub fn identity_residual(&self) -> f64 {
        let c = |m: &CMatrix| m.map(|x| x.conj());
        [
            inf_norm(&(&self.hzz - self.hzz.adjoint())),
            inf_norm(&(&self.hzbz - self.hzzb.adjoint())),
            inf_norm(&(&self.hzbzb - c(&self.hzz))),
            inf_norm(&(&self.hzbz - c(&self.hzzb))),
            inf_norm(&(&self.hzz - self.hzbzb.transpose())),
            inf_norm(&(&self.hzzb - self.hzzb.transpose())),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Outer finite-difference step for differencing cogradients.
fn second_step(x: f64) -> f64 {
    x.abs().max(1.0) * f64::EPSILON.powf(0.25)
}

fn cograd_at(f: &dyn ScalarField, z: &CVector) -> Result<WirtingerPair> {
    let p = ComplexPoint::new(z.clone())?;
    match f.analytic_cogradients(z) {
        Some(pair) => Ok(pair),
        None => cogradients_fd(f, &p, None),
    }
}

/// Differences the cogradients once to obtain raw blocks.
fn fd_blocks(f: &dyn ScalarField, p: &ComplexPoint) -> Result<HessianBlocks> {
    let n = p.dim();
    let z = p.z();
    // For each column l: (∂/∂x_l, ∂/∂y_l) of the columns dz and dzbar.
    let cols: Vec<(CVector, CVector, CVector, CVector)> = (0..n)
        .into_par_iter()
        .map(|l| {
            let hx = second_step(z[l].re);
            let hy = second_step(z[l].im);
            let shifted = |delta: C64| -> Result<WirtingerPair> {
                let mut zz = z.clone();
                zz[l] += delta;
                cograd_at(f, &zz)
            };
            let xp = shifted(C64::new(hx, 0.0))?;
            let xm = shifted(C64::new(-hx, 0.0))?;
            let yp = shifted(C64::new(0.0, hy))?;
            let ym = shifted(C64::new(0.0, -hy))?;
            Ok((
                (&xp.dz - &xm.dz).unscale(2.0 * hx),
                (&yp.dz - &ym.dz).unscale(2.0 * hy),
                (&xp.dzbar - &xm.dzbar).unscale(2.0 * hx),
                (&yp.dzbar - &ym.dzbar).unscale(2.0 * hy),
            ))
        })
        .collect::<Result<_>>()?;
    let mut b = HessianBlocks {
        hzz: CMatrix::zeros(n, n),
        hzbz: CMatrix::zeros(n, n),
        hzzb: CMatrix::zeros(n, n),
        hzbzb: CMatrix::zeros(n, n),
    };
    for (l, (dz_x, dz_y, dzb_x, dzb_y)) in cols.iter().enumerate() {
        for k in 0..n {
            // (∂f/∂z)ᴴ_k = dzbar_k and (∂f/∂z̄)ᴴ_k = dz_k for real f.
            b.hzz[(k, l)] = (dzb_x[k] - J * dzb_y[k]) * 0.5;
            b.hzbz[(k, l)] = (dzb_x[k] + J * dzb_y[k]) * 0.5;
            b.hzzb[(k, l)] = (dz_x[k] - J * dz_y[k]) * 0.5;
            b.hzbzb[(k, l)] = (dz_x[k] + J * dz_y[k]) * 0.5;
        }
    }
    Ok(b)
}

/// The four Hessian blocks of `f` at `p`: analytic when the field supplies
/// them, otherwise by differencing cogradients at perturbed points.
pub fn hessian_quad(f: &dyn ScalarField, p: &ComplexPoint) -> Result<HessianQuad> {
    if f.dim() != p.dim() {
        return Err(CrError::Dimension("field and point dimensions differ".into()));
    }
    match f.analytic_hessian(p.z()) {
        Some(b) => HessianQuad::from_blocks(b, SYM_TOL_ANALYTIC),
        None => HessianQuad::from_blocks(fd_blocks(f, p)?, SYM_TOL_FD),
    }
}

/// Numerical Hessian even when analytic blocks exist; used by checkers.
pub fn hessian_quad_fd(f: &dyn ScalarField, p: &ComplexPoint) -> Result<HessianQuad> {
    if f.dim() != p.dim() {
        return Err(CrError::Dimension("field and point dimensions differ".into()));
    }
    HessianQuad::from_blocks(fd_blocks(f, p)?, SYM_TOL_FD)
}

/// `Jᴴ M J` by blocks.
pub fn jh_m_j(m: &CMatrix) -> CMatrix {
    let (a, b, c, d) = split_blocks(m);
    let tl = &a + &b + &c + &d;
    let tr = (&a - &b + &c - &d) * J;
    let bl = (&c + &d - &a - &b) * J;
    let br = &a - &b - &c + &d;
    join_blocks(&tl, &tr, &bl, &br)
}

/// `¼ J M Jᴴ` by blocks.
pub fn quarter_j_m_jh(m: &CMatrix) -> CMatrix {
    let (p, q, r, t) = split_blocks(m);
    let tl = &p + (&r - &q) * J + &t;
    let tr = &p + (&r + &q) * J - &t;
    let bl = &p - (&r + &q) * J - &t;
    let br = &p + (&q - &r) * J + &t;
    join_blocks(&tl, &tr, &bl, &br).scale(0.25)
}

/// `H^ℂ`, `H^ℝ = S H^ℂ` and `H_rr = Jᴴ H^ℂ J`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledHessians {
    pub hc_complex: CMatrix,
    pub hc_real: CMatrix,
    pub hrr: RMatrix,
}

pub fn assemble(q: &HessianQuad) -> Result<AssembledHessians> {
    let hc = q.hc();
    let scale = inf_norm(&hc).max(1.0);
    let hrr_c = jh_m_j(&hc);
    let imag = hrr_c.iter().fold(0.0_f64, |acc, x| acc.max(x.im.abs()));
    if imag > REL_TOL * scale {
        return Err(CrError::RelationViolation {
            relation: "imaginary part of Jᴴ H^ℂ J",
            residual: imag,
            tol: REL_TOL * scale,
        });
    }
    let hrr = hrr_c.map(|x| x.re);
    let back = quarter_j_m_jh(&crate::linalg::to_complex(&hrr));
    let res = inf_norm(&(&back - &hc));
    if res > REL_TOL * scale {
        return Err(CrError::RelationViolation {
            relation: "H^ℂ = ¼ J H_rr Jᴴ",
            residual: res,
            tol: REL_TOL * scale,
        });
    }
    let hrr = (&hrr + hrr.transpose()).scale(0.5);
    Ok(AssembledHessians {
        hc_real: swap_rows(&hc)?,
        hc_complex: hc,
        hrr,
    })
}

/// Representation in which a second-order expansion is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    R,
    CComplex,
    CReal,
    Z,
}

impl Representation {
    pub const ALL: [Representation; 4] = [Self::R, Self::CComplex, Self::CReal, Self::Z];
}

/// Second-order terms `[r, c-complex, c-real, z]`:
/// `½ΔrᵀH_rrΔr`, `½ΔcᴴH^ℂΔc`, `½ΔcᵀH^ℝΔc`, `Re{ΔzᴴH_zzΔz + ΔzᴴH_z̄zΔz̄}`.
pub fn second_order_terms(q: &HessianQuad, dz: &CVector) -> Result<[f64; 4]> {
    let n = q.dim();
    if dz.len() != n {
        return Err(CrError::Dimension("step and Hessian dimensions differ".into()));
    }
    let asm = assemble(q)?;
    let dzb = dz.map(|x| x.conj());
    let dc = crate::linalg::stack(dz, &dzb);
    let dr = crate::linalg::RVector::from_fn(2 * n, |i, _| if i < n { dz[i].re } else { dz[i - n].im });
    let r_term = 0.5 * dr.dot(&(&asm.hrr * &dr));
    let cc_term = 0.5 * dc.dotc(&(&asm.hc_complex * &dc)).re;
    let cr_term = 0.5 * dc.dot(&(&asm.hc_real * &dc)).re;
    let z_term = (dz.dotc(&(&q.hzz * dz)) + dz.dotc(&(&q.hzbz * &dzb))).re;
    Ok([r_term, cc_term, cr_term, z_term])
}

/// Second-order Taylor prediction of `f(p + Δz)` in the chosen representation.
pub fn second_order_predict(
    f: &dyn ScalarField,
    p: &ComplexPoint,
    dz: &CVector,
    repr: Representation,
) -> Result<f64> {
    let pair = cogradients(f, p)?;
    let q = hessian_quad(f, p)?;
    let lin = first_order_terms(&pair, dz);
    let quad = second_order_terms(&q, dz)?;
    let (l, s) = match repr {
        Representation::R => (lin[0], quad[0]),
        Representation::CComplex => (lin[1], quad[1]),
        Representation::CReal => (lin[1], quad[2]),
        Representation::Z => (lin[2], quad[3]),
    };
    Ok(f.eval(p.z()) + l + s)
}

/// Real-coordinate Hessian by plain second differences of `f`; a test oracle
/// independent of the cogradient machinery.
pub fn hrr_by_real_fd(f: &dyn ScalarField, p: &ComplexPoint) -> RMatrix {
    let n = p.dim();
    let z = p.z();
    let unit = |i: usize| -> CVector {
        let mut v = CVector::zeros(n);
        if i < n {
            v[i] = C64::new(1.0, 0.0);
        } else {
            v[i - n] = C64::new(0.0, 1.0);
        }
        v
    };
    let h = f64::EPSILON.powf(0.25) * inf_norm(&CMatrix::from_column_slice(n, 1, z.as_slice())).max(1.0);
    let mut out = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        for j in 0..2 * n {
            let ei = unit(i).scale(h);
            let ej = unit(j).scale(h);
            let v = f.eval(&(z + &ei + &ej)) - f.eval(&(z + &ei - &ej)) - f.eval(&(z - &ei + &ej))
                + f.eval(&(z - &ei - &ej));
            out[(i, j)] = v / (4.0 * h * h);
        }
    }
    out
}

/// ‖A − B‖∞ / max(1, ‖B‖∞) for real matrices.
pub fn relative_residual_real(a: &RMatrix, b: &RMatrix) -> f64 {
    inf_norm_real(&(a - b)) / inf_norm_real(b).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr_core::{is_admissible_matrix, StructureMatrices};
    use crate::linalg::{hermitian_eigenvalues, singular_values, symmetric_eigenvalues};
    use crate::wirtinger::FnScalarField;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pt(v: &[C64]) -> ComplexPoint {
        ComplexPoint::from_slice(v).unwrap()
    }

    #[test]
    fn abs_squared_blocks() {
        let f = FnScalarField::new(1, |z| z[0].norm_sqr());
        let q = hessian_quad(&f, &pt(&[c(0.3, -2.0)])).unwrap();
        assert!((q.hzz[(0, 0)] - c(1.0, 0.0)).norm() < 1e-6);
        assert!(q.hzbz[(0, 0)].norm() < 1e-6);
    }

    #[test]
    fn re_z_squared_blocks() {
        let f = FnScalarField::new(1, |z| (z[0] * z[0]).re);
        let q = hessian_quad(&f, &pt(&[c(1.1, 0.4)])).unwrap();
        assert!(q.hzz[(0, 0)].norm() < 1e-6);
        assert!((q.hzbz[(0, 0)] - c(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn bad_analytic_blocks_rejected() {
        let f = FnScalarField::new(1, |z| z[0].norm_sqr()).with_hessian(|_| HessianBlocks {
            hzz: CMatrix::from_element(1, 1, c(1.0, 0.5)),
            hzbz: CMatrix::zeros(1, 1),
            hzzb: CMatrix::zeros(1, 1),
            hzbzb: CMatrix::from_element(1, 1, c(1.0, 0.0)),
        });
        assert!(matches!(
            hessian_quad(&f, &pt(&[c(0.0, 0.0)])),
            Err(CrError::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn block_products_match_dense() {
        let sm = StructureMatrices::new(2);
        let m = CMatrix::from_fn(4, 4, |i, j| c((i * 3 + j) as f64 * 0.1, (i as f64) - (j as f64)));
        let dense = sm.j().adjoint() * &m * sm.j();
        assert!(inf_norm(&(jh_m_j(&m) - dense)) < 1e-13);
        let dense = (sm.j() * &m * sm.j().adjoint()).scale(0.25);
        assert!(inf_norm(&(quarter_j_m_jh(&m) - dense)) < 1e-13);
    }

    #[test]
    fn assembled_relations() {
        let hzz = CMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(0.5, 0.2), c(0.5, -0.2), c(2.0, 0.0)]);
        let hzbz = CMatrix::from_row_slice(2, 2, &[c(0.4, 0.1), c(-0.3, 0.7), c(-0.3, 0.7), c(0.2, -0.5)]);
        let q = HessianQuad::from_blocks(HessianBlocks::from_upper(hzz, hzbz), 1e-12).unwrap();
        let a = assemble(&q).unwrap();
        let s = StructureMatrices::new(2).s_complex();
        assert_eq!(a.hc_real, &s * &a.hc_complex);
        assert!(is_admissible_matrix(&a.hc_complex, 1e-12).unwrap());
        let er = symmetric_eigenvalues(&a.hrr);
        let ec = hermitian_eigenvalues(&a.hc_complex);
        for (x, y) in er.iter().zip(ec.iter()) {
            assert!((x - 2.0 * y).abs() < 1e-10);
        }
        let s1 = singular_values(&a.hc_complex);
        let s2 = singular_values(&a.hc_real);
        for (x, y) in s1.iter().zip(s2.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_step_and_exact_quadratic() {
        let f = FnScalarField::new(1, |z| (z[0] - c(1.0, 2.0)).norm_sqr() + (z[0] * z[0]).re);
        let p = pt(&[c(0.2, 0.1)]);
        for r in Representation::ALL {
            let v = second_order_predict(&f, &p, &CVector::zeros(1), r).unwrap();
            assert!((v - f.eval(p.z())).abs() < 1e-12);
            let dz = CVector::from_element(1, c(0.7, -0.4));
            let v = second_order_predict(&f, &p, &dz, r).unwrap();
            assert!((v - f.eval(&(p.z() + &dz))).abs() < 1e-6);
        }
    }
}
