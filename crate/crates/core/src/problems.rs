//! Built-in benchmark problems.
//!
//! The scalar estimation problem fits `y_k ≈ αz + βz̄` under
//! `ℓ(z) = ½⟨|y − αz − βz̄|²⟩`; its loss is exactly quadratic, so the
//! Hessian is constant and Newton's method finishes in one step.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CrError, Result};
use crate::hessian::HessianBlocks;
use crate::lms::circular_gaussian;
use crate::lsq::LsqProblem;
use crate::linalg::{CMatrix, CVector, C64};
use crate::poly::{ComplexPoly, PolyMap};
use crate::wirtinger::{FnVectorField, JacobianPair, ScalarField, VectorField, WirtingerPair};

/// Relative identifiability threshold on `||α|² − |β|²|`.
pub const IDENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Example1Problem {
    pub alpha: C64,
    pub beta: C64,
    samples: Vec<C64>,
    mean_y: C64,
    mean_abs2: f64,
    // ⟨|y − ⟨y⟩|²⟩, summed directly.
    spread: f64,
}

impl Example1Problem {
    pub fn new(alpha: C64, beta: C64, samples: Vec<C64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(CrError::InvalidArgument("need at least one sample".into()));
        }
        let finite = |c: &C64| c.re.is_finite() && c.im.is_finite();
        if !samples.iter().all(finite) || !finite(&alpha) || !finite(&beta) {
            return Err(CrError::NonFiniteEvaluation {
                context: "problem parameters".into(),
            });
        }
        let k = samples.len() as f64;
        let mean_y = samples.iter().sum::<C64>() / k;
        let mean_abs2 = samples.iter().map(|y| y.norm_sqr()).sum::<f64>() / k;
        let spread = samples.iter().map(|y| (y - mean_y).norm_sqr()).sum::<f64>() / k;
        Ok(Self {
            alpha,
            beta,
            samples,
            mean_y,
            mean_abs2,
            spread,
        })
    }

    /// `y_k = αz_true + βz̄_true + n_k` with circular Gaussian noise of variance `noise_var`.
    pub fn synthetic(alpha: C64, beta: C64, z_true: C64, noise_var: f64, n_samples: usize, seed: u64) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(CrError::InvalidArgument(format!("noise variance must be >= 0, got {noise_var}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clean = alpha * z_true + beta * z_true.conj();
        let samples = (0..n_samples)
            .map(|_| clean + circular_gaussian(&mut rng) * noise_var.sqrt())
            .collect();
        Self::new(alpha, beta, samples)
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    /// `⟨y⟩`.
    pub fn mean_y(&self) -> C64 {
        self.mean_y
    }

    /// `⟨ȳ⟩`.
    pub fn mean_ybar(&self) -> C64 {
        self.mean_y.conj()
    }

    /// `⟨|y|²⟩`.
    pub fn mean_abs2(&self) -> f64 {
        self.mean_abs2
    }

    /// `|α|² + |β|²`.
    pub fn s(&self) -> f64 {
        self.alpha.norm_sqr() + self.beta.norm_sqr()
    }

    /// `|α|² − |β|²`.
    pub fn gap(&self) -> f64 {
        self.alpha.norm_sqr() - self.beta.norm_sqr()
    }

    pub fn is_identifiable(&self) -> bool {
        self.gap().abs() > IDENT_TOL * self.s()
    }

    /// `H_zz = ½(|α|² + |β|²)` and `H_z̄z = ᾱβ`; constant in `z`.
    pub fn hessian_blocks(&self) -> HessianBlocks {
        let hzz = CMatrix::from_element(1, 1, C64::new(0.5 * self.s(), 0.0));
        let hzbz = CMatrix::from_element(1, 1, self.alpha.conj() * self.beta);
        HessianBlocks::from_upper(hzz, hzbz)
    }

    /// `½[[|α|²+|β|², 2ᾱβ], [2αβ̄, |α|²+|β|²]]`.
    pub fn hessian_closed_form(&self) -> CMatrix {
        let s = C64::new(self.s(), 0.0);
        let off = self.alpha.conj() * self.beta * 2.0;
        CMatrix::from_row_slice(2, 2, &[s, off, off.conj(), s]).scale(0.5)
    }
}

/// The loss of [`Example1Problem`] with analytic cogradients and Hessian.
#[derive(Debug, Clone)]
pub struct Example1Loss {
    pub problem: Example1Problem,
}

impl Example1Loss {
    /// `∂ℓ/∂z = αβ̄z + ½(|α|²+|β|²)z̄ − ½(α⟨ȳ⟩ + β̄⟨y⟩)`.
    pub fn dz(&self, z: C64) -> C64 {
        let p = &self.problem;
        p.alpha * p.beta.conj() * z + z.conj() * (0.5 * p.s())
            - (p.alpha * p.mean_ybar() + p.beta.conj() * p.mean_y()) * 0.5
    }
}

impl ScalarField for Example1Loss {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, z: &CVector) -> f64 {
        let p = &self.problem;
        let g = p.alpha * z[0] + p.beta * z[0].conj();
        // Same as ½(⟨|y|²⟩ − 2Re{⟨ȳ⟩g} + |g|²) without the cancellation near the optimum.
        0.5 * (p.spread + (p.mean_y - g).norm_sqr())
    }

    fn analytic_cogradients(&self, z: &CVector) -> Option<WirtingerPair> {
        Some(WirtingerPair::real_from_dz(CVector::from_element(1, self.dz(z[0]))))
    }

    fn analytic_hessian(&self, _z: &CVector) -> Option<HessianBlocks> {
        Some(self.problem.hessian_blocks())
    }
}

pub fn example1_loss_field(p: &Example1Problem) -> Example1Loss {
    Example1Loss { problem: p.clone() }
}

/// `ẑ_opt = (ᾱ⟨y⟩ − β⟨ȳ⟩) / (|α|² − |β|²)`.
pub fn example1_closed_form(p: &Example1Problem) -> Result<C64> {
    if !p.is_identifiable() {
        return Err(CrError::Unidentifiable { gap: p.gap().abs() });
    }
    Ok((p.alpha.conj() * p.mean_y() - p.beta * p.mean_ybar()) / p.gap())
}

/// `g(z) = αz + βz̄` as a map `ℂ → ℂ`.
pub fn linear_model(alpha: C64, beta: C64) -> FnVectorField {
    FnVectorField::new(1, 1, move |z| CVector::from_element(1, alpha * z[0] + beta * z[0].conj())).with_jacobians(
        move |_| JacobianPair::new(CMatrix::from_element(1, 1, alpha), CMatrix::from_element(1, 1, beta)),
    )
}

/// The same problem as weighted least squares: `g(z) = (αz + βz̄)·1` against
/// all samples with `W = I/m`, so the loss equals [`Example1Loss`].
pub fn example2_as_lsq(p: &Example1Problem) -> Result<LsqProblem> {
    let m = p.samples().len();
    let (alpha, beta) = (p.alpha, p.beta);
    let g = FnVectorField::new(1, m, move |z| CVector::from_element(m, alpha * z[0] + beta * z[0].conj()))
        .with_jacobians(move |_| {
            JacobianPair::new(CMatrix::from_element(m, 1, alpha), CMatrix::from_element(m, 1, beta))
        });
    let y = CVector::from_column_slice(p.samples());
    let w = CMatrix::identity(m, m).scale(1.0 / m as f64);
    LsqProblem::new(Arc::new(g), y, w)
}

/// Least squares with a polynomial model `g` and data `y`.
pub fn custom_polynomial_lsq(n: usize, components: Vec<ComplexPoly>, y: CVector, w: Option<CMatrix>) -> Result<LsqProblem> {
    let g: Arc<dyn VectorField> = Arc::new(PolyMap::new(n, components)?);
    let m = g.dim_out();
    LsqProblem::new(g, y, w.unwrap_or_else(|| CMatrix::identity(m, m)))
}
