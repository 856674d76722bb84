//! Weighted complex nonlinear least squares, `ℓ = ½ (y − g)ᴴ W (y − g)`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::cr_core::{project_admissible, swap, ComplexPoint};
use crate::error::{CrError, Result};
use crate::hessian::{HessianBlocks, HessianQuad, SYM_TOL_FD};
use crate::linalg::{
    all_finite, conj_vec, hermitian_residual, inf_norm, is_positive_definite, split_blocks, stack,
    CMatrix, CVector, C64, J,
};
use crate::wirtinger::{jacobians, JacobianPair, ScalarField, VectorField, WirtingerPair};

#[derive(Clone)]
pub struct LsqProblem {
    g: Arc<dyn VectorField>,
    y: CVector,
    w: CMatrix,
    // Real diagonal of `W` when it has no off-diagonal entries.
    w_diag: Option<Vec<f64>>,
}

impl std::fmt::Debug for LsqProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LsqProblem")
            .field("n", &self.g.dim_in())
            .field("m", &self.g.dim_out())
            .field("y", &self.y)
            .field("w", &self.w)
            .finish()
    }
}

/// Loss cogradient as the row `∂ℓ/∂c` and the admissible column `(∂ℓ/∂c)ᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCogradient {
    pub row: CVector,
    pub col: CVector,
}

impl LossCogradient {
    pub fn pair(&self) -> WirtingerPair {
        let n = self.col.len() / 2;
        WirtingerPair {
            dz: self.row.rows(0, n).into_owned(),
            dzbar: self.row.rows(n, n).into_owned(),
        }
    }
}

impl LsqProblem {
    /// Validates dimensions and that `W` is Hermitian positive definite.
    pub fn new(g: Arc<dyn VectorField>, y: CVector, w: CMatrix) -> Result<Self> {
        let m = g.dim_out();
        if y.len() != m {
            return Err(CrError::Dimension(format!(
                "data has length {} but the model has {m} outputs",
                y.len()
            )));
        }
        if w.shape() != (m, m) {
            return Err(CrError::Dimension(format!(
                "weight must be {m}x{m}, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if !all_finite(&y) {
            return Err(CrError::NonFiniteEvaluation {
                context: "least-squares data".into(),
            });
        }
        let res = hermitian_residual(&w);
        if res > 1e-10 * inf_norm(&w).max(1.0) {
            return Err(CrError::InvalidArgument(format!(
                "weight matrix is not Hermitian (residual {res:.3e})"
            )));
        }
        let w = (&w + w.adjoint()).scale(0.5);
        let is_diag = (0..m).all(|j| (0..m).all(|i| i == j || w[(i, j)] == C64::new(0.0, 0.0)));
        let w_diag = is_diag.then(|| (0..m).map(|i| w[(i, i)].re).collect::<Vec<_>>());
        let pd = match &w_diag {
            Some(d) => d.iter().all(|&x| x > 0.0),
            None => is_positive_definite(&w),
        };
        if !pd {
            return Err(CrError::InvalidArgument("weight matrix is not positive definite".into()));
        }
        Ok(Self { g, y, w, w_diag })
    }

    pub fn with_identity_weight(g: Arc<dyn VectorField>, y: CVector) -> Result<Self> {
        let m = g.dim_out();
        Self::new(g, y, CMatrix::identity(m, m))
    }

    pub fn n(&self) -> usize {
        self.g.dim_in()
    }

    pub fn m(&self) -> usize {
        self.g.dim_out()
    }

    pub fn model(&self) -> &Arc<dyn VectorField> {
        &self.g
    }

    pub fn data(&self) -> &CVector {
        &self.y
    }

    pub fn weight(&self) -> &CMatrix {
        &self.w
    }

    /// `W x`.
    fn apply_w(&self, x: &CVector) -> CVector {
        match &self.w_diag {
            Some(d) => CVector::from_fn(x.len(), |i, _| x[i] * d[i]),
            None => &self.w * x,
        }
    }

    /// `Gᴴ W G`.
    fn weighted_gram(&self, g: &CMatrix) -> CMatrix {
        match &self.w_diag {
            Some(d) => {
                let wg = CMatrix::from_fn(g.nrows(), g.ncols(), |i, k| g[(i, k)] * d[i]);
                g.adjoint() * wg
            }
            None => g.adjoint() * (&self.w * g),
        }
    }

    fn check_point(&self, p: &ComplexPoint) -> Result<()> {
        if p.dim() != self.n() {
            return Err(CrError::Dimension(format!(
                "problem has n = {}, point has n = {}",
                self.n(),
                p.dim()
            )));
        }
        Ok(())
    }

    /// `e = y − g(z)`.
    pub fn residual(&self, p: &ComplexPoint) -> Result<CVector> {
        self.check_point(p)?;
        let gz = self.g.eval(p.z());
        if gz.len() != self.m() {
            return Err(CrError::Dimension("model returned wrong output length".into()));
        }
        if !all_finite(&gz) {
            return Err(CrError::NonFiniteEvaluation {
                context: "least-squares model".into(),
            });
        }
        Ok(&self.y - gz)
    }

    pub fn loss(&self, p: &ComplexPoint) -> Result<f64> {
        let e = self.residual(p)?;
        Ok(0.5 * e.dotc(&self.apply_w(&e)).re)
    }

    /// `G = [∂g/∂z, ∂g/∂z̄]`, m×2n.
    pub fn compound_jacobian(&self, p: &ComplexPoint) -> Result<CMatrix> {
        self.check_point(p)?;
        Ok(compound(&jacobians(self.g.as_ref(), p)?))
    }

    /// `(∂ℓ/∂c)ᴴ = ½(B + S B̄)` with `B = −GᴴWe`.
    pub fn loss_cogradient(&self, p: &ComplexPoint) -> Result<LossCogradient> {
        let e = self.residual(p)?;
        let g = self.compound_jacobian(p)?;
        let b = -(g.adjoint() * self.apply_w(&e));
        let col = (&b + swap(&conj_vec(&b))?).scale(0.5);
        let row = conj_vec(&col);
        Ok(LossCogradient { row, col })
    }

    /// `P(GᴴWG)`.
    pub fn gauss_newton_hessian(&self, p: &ComplexPoint) -> Result<CMatrix> {
        let g = self.compound_jacobian(p)?;
        project_admissible(&self.weighted_gram(&g))
    }

    /// `(U_zz, U_z̄z)`, the upper blocks of the Gauss-Newton Hessian.
    pub fn gauss_newton_blocks(&self, p: &ComplexPoint) -> Result<(CMatrix, CMatrix)> {
        let (uzz, uzbz, _, _) = split_blocks(&self.gauss_newton_hessian(p)?);
        Ok((uzz, uzbz))
    }

    /// Curvature terms `P(aᵢ ∂/∂c (∂gᵢ/∂c)ᴴ)` with `aᵢ = [We]ᵢ`, one per residual component.
    pub fn curvature_terms(&self, p: &ComplexPoint) -> Result<Vec<CMatrix>> {
        let e = self.residual(p)?;
        let a = self.apply_w(&e);
        let n = self.n();
        let m = self.m();
        let z = p.z();
        // Jacobian pairs at ±x_l and ±y_l perturbations.
        let probes: Vec<[JacobianPair; 4]> = (0..n)
            .into_par_iter()
            .map(|l| {
                let hx = z[l].re.abs().max(1.0) * f64::EPSILON.powf(0.25);
                let hy = z[l].im.abs().max(1.0) * f64::EPSILON.powf(0.25);
                let at = |d: C64| -> Result<JacobianPair> {
                    let mut zz = z.clone();
                    zz[l] += d;
                    jacobians(self.g.as_ref(), &ComplexPoint::new(zz)?)
                };
                Ok([
                    at(C64::new(hx, 0.0))?,
                    at(C64::new(-hx, 0.0))?,
                    at(C64::new(0.0, hy))?,
                    at(C64::new(0.0, -hy))?,
                ])
            })
            .collect::<Result<_>>()?;
        let steps: Vec<(f64, f64)> = (0..n)
            .map(|l| {
                (
                    z[l].re.abs().max(1.0) * f64::EPSILON.powf(0.25),
                    z[l].im.abs().max(1.0) * f64::EPSILON.powf(0.25),
                )
            })
            .collect();
        (0..m)
            .into_par_iter()
            .map(|i| {
                // Column (∂gᵢ/∂c)ᴴ = conj of row i of G.
                let col = |jp: &JacobianPair| -> CVector {
                    CVector::from_fn(2 * n, |k, _| {
                        if k < n {
                            jp.j[(i, k)].conj()
                        } else {
                            jp.jc[(i, k - n)].conj()
                        }
                    })
                };
                let mut amat = CMatrix::zeros(2 * n, 2 * n);
                for l in 0..n {
                    let (hx, hy) = steps[l];
                    let [xp, xm, yp, ym] = &probes[l];
                    let dx = (col(xp) - col(xm)).unscale(2.0 * hx);
                    let dy = (col(yp) - col(ym)).unscale(2.0 * hy);
                    amat.set_column(l, &(&dx - &dy * J).scale(0.5));
                    amat.set_column(n + l, &(&dx + &dy * J).scale(0.5));
                }
                project_admissible(&amat.map(|x| x * a[i]))
            })
            .collect()
    }

    /// `P(GᴴWG) − Σᵢ P(aᵢ Aᵢ)`, summed in component order.
    pub fn newton_hessian(&self, p: &ComplexPoint) -> Result<CMatrix> {
        let mut h = self.gauss_newton_hessian(p)?;
        for t in self.curvature_terms(p)? {
            h -= t;
        }
        Ok(h)
    }

    pub fn newton_quad(&self, p: &ComplexPoint) -> Result<HessianQuad> {
        HessianQuad::from_blocks(HessianBlocks::from_hc(&self.newton_hessian(p)?), SYM_TOL_FD)
    }

    pub fn gauss_newton_quad(&self, p: &ComplexPoint) -> Result<HessianQuad> {
        HessianQuad::from_blocks(HessianBlocks::from_hc(&self.gauss_newton_hessian(p)?), SYM_TOL_FD)
    }
}

/// `[J, Jc]`.
pub fn compound(jp: &JacobianPair) -> CMatrix {
    let (m, n) = jp.j.shape();
    let mut g = CMatrix::zeros(m, 2 * n);
    g.view_mut((0, 0), (m, n)).copy_from(&jp.j);
    g.view_mut((0, n), (m, n)).copy_from(&jp.jc);
    g
}

impl ScalarField for LsqProblem {
    fn dim(&self) -> usize {
        self.n()
    }

    fn eval(&self, z: &CVector) -> f64 {
        let e = &self.y - self.g.eval(z);
        0.5 * e.dotc(&self.apply_w(&e)).re
    }

    fn analytic_cogradients(&self, z: &CVector) -> Option<WirtingerPair> {
        let p = ComplexPoint::new(z.clone()).ok()?;
        self.loss_cogradient(&p).ok().map(|g| g.pair())
    }
}

/// Stacks `col(Δz, Δz̄)`.
pub fn conj_stack(dz: &CVector) -> CVector {
    stack(dz, &conj_vec(dz))
}
