//! Generalized gradient descent `ĉ ← ĉ + αΔc`, `Δc = −Q (∂ℓ/∂c)ᴴ`.
//!
//! Every member of the family is defined by an admissible Hermitian
//! "Q-defining" matrix `M` with `Q = M⁻¹`: the identity, the Newton Hessian
//! `H^ℂ`, its block diagonal, the Gauss-Newton Hessian `P(GᴴWG)` and its
//! block diagonal. Updates are carried out on `z` only; `Δz̄` is its
//! conjugate by admissibility.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::cr_core::{admissibility_residual_matrix, ComplexPoint, ConjugateCoordinates, ADMISSIBILITY_TOL};
use crate::error::{CrError, Result};
use crate::hessian::{assemble, hessian_quad, HessianBlocks, HessianQuad};
use crate::linalg::{
    cholesky_condition_estimate, hermitian_eigenvalues, inf_norm, inf_norm_vec, is_positive_definite,
    join_blocks, solve_checked_scaled, stack, CMatrix, CVector,
};
use crate::lsq::LsqProblem;
use crate::wirtinger::{cogradients, jacobians, FnScalarField, ScalarField, VectorField, WirtingerPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QKind {
    Identity,
    Newton,
    QuasiNewton,
    GaussNewton,
    QuasiGaussNewton,
}

impl QKind {
    pub const ALL: [QKind; 5] = [
        QKind::Identity,
        QKind::Newton,
        QKind::QuasiNewton,
        QKind::GaussNewton,
        QKind::QuasiGaussNewton,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QKind::Identity => "identity",
            QKind::Newton => "newton",
            QKind::QuasiNewton => "quasi_newton",
            QKind::GaussNewton => "gauss_newton",
            QKind::QuasiGaussNewton => "quasi_gauss_newton",
        }
    }

    pub fn needs_least_squares(self) -> bool {
        matches!(self, QKind::GaussNewton | QKind::QuasiGaussNewton)
    }
}

impl fmt::Display for QKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QKind {
    type Err = CrError;

    fn from_str(s: &str) -> Result<Self> {
        QKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| CrError::InvalidArgument(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QStrategy {
    pub kind: QKind,
    /// Tikhonov shift added to the Q-defining matrix; 0 disables it.
    pub damping: f64,
}

impl QStrategy {
    pub fn new(kind: QKind) -> Self {
        Self { kind, damping: 0.0 }
    }

    pub fn damped(kind: QKind, damping: f64) -> Result<Self> {
        if !(damping >= 0.0 && damping.is_finite()) {
            return Err(CrError::InvalidArgument(format!("damping must be >= 0, got {damping}")));
        }
        Ok(Self { kind, damping })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backtracking {
    Off,
    Armijo { beta: f64, c1: f64 },
}

impl Backtracking {
    pub fn armijo() -> Self {
        Backtracking::Armijo { beta: 0.5, c1: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub backtracking: Backtracking,
    pub record_trace: bool,
}

impl OptimizerConfig {
    /// Unit step for the Newton and Gauss-Newton variants, 0.1 for the identity;
    /// 1000 iterations, gradient tolerance 1e-8.
    pub fn default_for(kind: QKind) -> Self {
        Self {
            step: if kind == QKind::Identity { 0.1 } else { 1.0 },
            max_iters: 1000,
            grad_tol: 1e-8,
            backtracking: Backtracking::Off,
            record_trace: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(CrError::InvalidArgument(format!("step size must be > 0, got {}", self.step)));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(CrError::InvalidArgument(format!(
                "gradient tolerance must be > 0, got {}",
                self.grad_tol
            )));
        }
        if let Backtracking::Armijo { beta, c1 } = self.backtracking {
            if !(beta > 0.0 && beta < 1.0 && c1 > 0.0 && c1 < 1.0) {
                return Err(CrError::InvalidArgument(
                    "Armijo parameters must satisfy 0 < beta < 1 and 0 < c1 < 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// The objective being minimized.
#[derive(Clone, Copy)]
pub enum Target<'a> {
    Field(&'a dyn ScalarField),
    Lsq(&'a LsqProblem),
}

impl Target<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Target::Field(f) => f.dim(),
            Target::Lsq(p) => p.n(),
        }
    }

    pub fn loss(&self, p: &ComplexPoint) -> Result<f64> {
        match self {
            Target::Field(f) => Ok(f.eval(p.z())),
            Target::Lsq(l) => l.loss(p),
        }
    }

    pub fn cogradients(&self, p: &ComplexPoint) -> Result<WirtingerPair> {
        match self {
            Target::Field(f) => cogradients(*f, p),
            Target::Lsq(l) => Ok(l.loss_cogradient(p)?.pair()),
        }
    }

    /// Full Newton Hessian `H^ℂ` at `p`.
    pub fn hessian(&self, p: &ComplexPoint) -> Result<HessianQuad> {
        match self {
            Target::Field(f) => hessian_quad(*f, p),
            Target::Lsq(l) => l.newton_quad(p),
        }
    }

    /// The undamped Q-defining matrix as Hessian blocks.
    fn q_blocks(&self, kind: QKind, p: &ComplexPoint) -> Result<HessianBlocks> {
        let n = self.dim();
        let zero = || CMatrix::zeros(n, n);
        let diag = |b: HessianBlocks| HessianBlocks {
            hzz: b.hzz,
            hzbz: zero(),
            hzzb: zero(),
            hzbzb: b.hzbzb,
        };
        let gn = |kind: QKind| -> Result<HessianBlocks> {
            match self {
                Target::Lsq(l) => Ok(HessianBlocks::from_hc(&l.gauss_newton_hessian(p)?)),
                Target::Field(_) => Err(CrError::UnsupportedStrategy { strategy: kind.name() }),
            }
        };
        Ok(match kind {
            QKind::Identity => HessianBlocks {
                hzz: CMatrix::identity(n, n),
                hzbz: zero(),
                hzzb: zero(),
                hzbzb: CMatrix::identity(n, n),
            },
            QKind::Newton => self.hessian(p)?.blocks(),
            QKind::QuasiNewton => diag(self.hessian(p)?.blocks()),
            QKind::GaussNewton => gn(kind)?,
            QKind::QuasiGaussNewton => diag(gn(kind)?),
        })
    }
}

/// Diagnostics for one descent step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub q_positive_definite: bool,
    /// Condition estimate of the Q-defining matrix (∞ when not PD).
    pub q_condition: f64,
    /// `(∂ℓ/∂c) Δc = 2Re{(∂ℓ/∂z) Δz} = −‖∇ℓ‖²_Q` per unit step.
    pub predicted_decrease: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentStep {
    pub dc: ConjugateCoordinates,
    pub diagnostics: StepDiagnostics,
}

impl DescentStep {
    pub fn dz(&self) -> CVector {
        self.dc.z()
    }
}

fn singular_q(e: CrError) -> CrError {
    match e {
        CrError::SingularMatrix { which } => CrError::SingularQ {
            factor: which,
            iteration: None,
        },
        other => other,
    }
}

/// `Δz` from the block system `H^ℂ Δc = −(∂f/∂c)ᴴ`, eliminating `Δz̄` through
/// the Schur complement `H_zz − H_z̄z H_z̄z̄⁻¹ H_zz̄`.
pub fn newton_update_z(q: &HessianQuad, grad: &WirtingerPair) -> Result<CVector> {
    newton_update_blocks(&q.blocks(), grad)
}

fn newton_update_blocks(b: &HessianBlocks, grad: &WirtingerPair) -> Result<CVector> {
    let n = b.dim();
    if grad.dz.len() != n || grad.dzbar.len() != n {
        return Err(CrError::Dimension("gradient and Hessian dimensions differ".into()));
    }
    let scale = inf_norm(&b.hc());
    let col = |v: &CVector| CMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let dz_h = col(&grad.dz.map(|x| x.conj()));
    let dzb_h = col(&grad.dzbar.map(|x| x.conj()));
    let mut rhs_parts = CMatrix::zeros(n, n + 1);
    rhs_parts.view_mut((0, 0), (n, n)).copy_from(&b.hzzb);
    rhs_parts.view_mut((0, n), (n, 1)).copy_from(&dzb_h);
    // H_z̄z̄⁻¹ [H_zz̄, (∂f/∂z̄)ᴴ] in one factorization.
    let solved = solve_checked_scaled(&b.hzbzb, &rhs_parts, "H_z̄z̄", scale)?;
    let inv_hzzb = solved.view((0, 0), (n, n)).into_owned();
    let inv_g = solved.view((0, n), (n, 1)).into_owned();
    let schur = &b.hzz - &b.hzbz * inv_hzzb;
    let rhs = &b.hzbz * inv_g - dz_h;
    let dz = solve_checked_scaled(&schur, &rhs, "Schur complement", scale)?;
    Ok(CVector::from_column_slice(dz.as_slice()))
}

/// One generalized-gradient step from `c` for the given strategy.
pub fn descent_step(target: Target<'_>, c: &ConjugateCoordinates, strategy: QStrategy) -> Result<DescentStep> {
    let p = ComplexPoint::new(c.z())?;
    let grad = target.cogradients(&p)?;
    descent_step_with(target, &p, &grad, strategy)
}

fn descent_step_with(
    target: Target<'_>,
    p: &ComplexPoint,
    grad: &WirtingerPair,
    strategy: QStrategy,
) -> Result<DescentStep> {
    if p.dim() != target.dim() {
        return Err(CrError::Dimension("point and objective dimensions differ".into()));
    }
    let n = p.dim();
    let mut b = target.q_blocks(strategy.kind, p)?;
    if strategy.damping > 0.0 {
        let shift = CMatrix::identity(n, n).scale(strategy.damping);
        b.hzz += &shift;
        b.hzbzb += &shift;
    }
    let m = b.hc();
    let adm = admissibility_residual_matrix(&m)?;
    if adm > ADMISSIBILITY_TOL * inf_norm(&m).max(1.0) {
        return Err(CrError::InadmissibleQ { residual: adm });
    }
    let dz = match strategy.kind {
        QKind::Identity => -grad.dz_h(),
        QKind::QuasiNewton | QKind::QuasiGaussNewton => {
            let col = CMatrix::from_column_slice(n, 1, grad.dz_h().as_slice());
            let which = if strategy.kind == QKind::QuasiNewton { "H_zz" } else { "U_zz" };
            let x = solve_checked_scaled(&b.hzz, &col, which, 0.0).map_err(singular_q)?;
            -CVector::from_column_slice(x.as_slice())
        }
        QKind::Newton | QKind::GaussNewton => newton_update_blocks(&b, grad).map_err(singular_q)?,
    };
    let dc = ConjugateCoordinates::from_z(&dz);
    let diagnostics = StepDiagnostics {
        q_positive_definite: is_positive_definite(&m),
        q_condition: cholesky_condition_estimate(&m),
        predicted_decrease: 2.0 * grad.dz.dot(&dz).re,
    };
    Ok(DescentStep { dc, diagnostics })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub z: CVector,
    pub loss: f64,
    pub grad_norm: f64,
    /// ‖αΔz‖∞ of the step taken from this iterate.
    pub step_norm: Option<f64>,
    pub q_condition: Option<f64>,
    pub q_positive_definite: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    /// The line search could not find an acceptable step.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub z: CVector,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: Status,
    pub trace: Vec<IterationRecord>,
}

const DIVERGENCE_LOSS: f64 = 1e12;
const MAX_BACKTRACKS: usize = 60;

/// Iterates until `‖∂ℓ/∂z‖∞ ≤ grad_tol` or `max_iters` steps have been taken.
pub fn minimize(
    target: Target<'_>,
    z0: &ComplexPoint,
    strategy: QStrategy,
    config: &OptimizerConfig,
) -> Result<OptimResult> {
    config.validate()?;
    if z0.dim() != target.dim() {
        return Err(CrError::Dimension("start point and objective dimensions differ".into()));
    }
    let diverged = |iteration: usize, loss: f64| CrError::Diverged {
        iteration,
        reason: if loss.is_nan() {
            "loss is NaN".into()
        } else {
            format!("loss {loss:.3e} exceeded {DIVERGENCE_LOSS:.0e}")
        },
    };
    let mut p = z0.clone();
    let mut loss = target.loss(&p)?;
    let mut trace = Vec::new();
    let mut k = 0;
    loop {
        if loss.is_nan() || loss.abs() > DIVERGENCE_LOSS {
            return Err(diverged(k, loss));
        }
        let grad = target.cogradients(&p)?;
        let grad_norm = inf_norm_vec(&grad.dz);
        let mut record = IterationRecord {
            iter: k,
            z: p.z().clone(),
            loss,
            grad_norm,
            step_norm: None,
            q_condition: None,
            q_positive_definite: None,
        };
        let finish = |status, record: IterationRecord, mut trace: Vec<IterationRecord>| {
            let z = record.z.clone();
            if config.record_trace {
                trace.push(record);
            }
            Ok(OptimResult {
                z,
                loss,
                grad_norm,
                iterations: k,
                status,
                trace,
            })
        };
        if grad_norm <= config.grad_tol {
            return finish(Status::Converged, record, trace);
        }
        if k >= config.max_iters {
            return finish(Status::MaxIters, record, trace);
        }
        let step = descent_step_with(target, &p, &grad, strategy).map_err(|e| match e {
            CrError::SingularQ { factor, .. } => CrError::SingularQ {
                factor,
                iteration: Some(k),
            },
            other => other,
        })?;
        record.q_condition = Some(step.diagnostics.q_condition);
        record.q_positive_definite = Some(step.diagnostics.q_positive_definite);
        let dz = step.dz();
        let mut t = config.step;
        let mut next;
        let mut next_loss;
        match config.backtracking {
            Backtracking::Off => {
                next = ComplexPoint::new(p.z() + dz.scale(t)).map_err(|_| diverged(k + 1, f64::NAN))?;
                next_loss = target.loss(&next)?;
            }
            Backtracking::Armijo { beta, c1 } => {
                let slope = step.diagnostics.predicted_decrease;
                let mut accepted = false;
                next = p.clone();
                next_loss = loss;
                // Below this the sufficient-decrease margin is lost in the loss's rounding.
                let noise = 8.0 * f64::EPSILON * loss.abs();
                if slope < 0.0 {
                    for _ in 0..MAX_BACKTRACKS {
                        if let Ok(cand) = ComplexPoint::new(p.z() + dz.scale(t)) {
                            let l = target.loss(&cand)?;
                            let margin = c1 * t * slope;
                            if l <= loss + margin || (l <= loss && -margin <= noise) {
                                next = cand;
                                next_loss = l;
                                accepted = true;
                                break;
                            }
                        }
                        t *= beta;
                    }
                }
                if !accepted {
                    record.step_norm = Some(0.0);
                    return finish(Status::Stalled, record, trace);
                }
            }
        }
        record.step_norm = Some(inf_norm_vec(&dz) * t);
        if config.record_trace {
            trace.push(record);
        }
        p = next;
        loss = next_loss;
        k += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimumKind {
    LocalMin,
    SaddleOrMax,
    Indefinite,
    Singular,
}

impl MinimumKind {
    pub fn name(self) -> &'static str {
        match self {
            MinimumKind::LocalMin => "local_min",
            MinimumKind::SaddleOrMax => "saddle_or_max",
            MinimumKind::Indefinite => "indefinite",
            MinimumKind::Singular => "singular",
        }
    }
}

/// Classifies a stationary point by the eigenvalues of `H^ℂ`.
pub fn check_minimum(q: &HessianQuad) -> MinimumKind {
    let eig = hermitian_eigenvalues(&q.hc());
    let scale = eig.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let tol = 1e-10 * scale;
    if scale == 0.0 || eig.iter().any(|x| x.abs() <= tol) {
        MinimumKind::Singular
    } else if eig.iter().all(|&x| x > 0.0) {
        MinimumKind::LocalMin
    } else if eig.iter().all(|&x| x < 0.0) {
        MinimumKind::SaddleOrMax
    } else {
        MinimumKind::Indefinite
    }
}

/// The real field `z ↦ ℓ(z) + Re(λᴴ g(z))`.
pub fn lagrangian(
    loss: Arc<dyn ScalarField>,
    g: Arc<dyn VectorField>,
    lambda: CVector,
) -> Result<FnScalarField> {
    let n = loss.dim();
    if g.dim_in() != n || g.dim_out() != lambda.len() {
        return Err(CrError::Dimension(format!(
            "loss has n = {n}, constraint maps {} -> {}, multiplier has length {}",
            g.dim_in(),
            g.dim_out(),
            lambda.len()
        )));
    }
    let (l1, g1, lam1) = (loss.clone(), g.clone(), lambda.clone());
    let field = FnScalarField::new(n, move |z| l1.eval(z) + lam1.dotc(&g1.eval(z)).re);
    Ok(field.with_cogradients(move |z| {
        let base = match loss.analytic_cogradients(z) {
            Some(pair) => pair,
            None => {
                let p = ComplexPoint::new(z.clone()).expect("finite point");
                crate::wirtinger::cogradients_fd(loss.as_ref(), &p, None).expect("finite loss")
            }
        };
        let p = ComplexPoint::new(z.clone()).expect("finite point");
        let jp = jacobians(g.as_ref(), &p).expect("finite constraint");
        // ∂/∂z Re(λᴴg) = ½(λᴴJ + λᵀ conj(Jc)).
        let extra = (jp.j.transpose() * lambda.map(|x| x.conj()) + jp.jc.adjoint() * &lambda).scale(0.5);
        let dz = base.dz + extra;
        WirtingerPair::real_from_dz(dz)
    }))
}

/// The Q-defining matrix actually used by a strategy at `p`, for diagnostics.
pub fn q_matrix(target: Target<'_>, p: &ComplexPoint, strategy: QStrategy) -> Result<CMatrix> {
    let mut b = target.q_blocks(strategy.kind, p)?;
    let n = p.dim();
    let shift = CMatrix::identity(n, n).scale(strategy.damping);
    b.hzz += &shift;
    b.hzbzb += &shift;
    Ok(join_blocks(&b.hzz, &b.hzbz, &b.hzzb, &b.hzbzb))
}

/// The update in all three coordinate systems for a Q-defining matrix `M`:
/// `(J Δr, Δc^ℝ, Δc^ℂ)` where `Δr` solves with `Jᴴ M J`, `Δc^ℝ` with `S M`
/// against `(∂ℓ/∂c)ᵀ`, and `Δc^ℂ` with `M` against `(∂ℓ/∂c)ᴴ`.
pub fn update_representations(m: &CMatrix, grad: &WirtingerPair) -> Result<(CVector, CVector, CVector)> {
    let n = grad.dz.len();
    let q = HessianQuad::from_blocks(HessianBlocks::from_hc(m), 1e-8)?;
    let asm = assemble(&q)?;
    let row = stack(&grad.dz, &grad.dzbar);
    let col_h = row.map(|x| x.conj());
    let as_mat = |v: &CVector| CMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let dcc = -solve_checked_scaled(&asm.hc_complex, &as_mat(&col_h), "H^ℂ", 0.0)?;
    let dcr = -solve_checked_scaled(&asm.hc_real, &as_mat(&row), "H^ℝ", 0.0)?;
    // (∂ℓ/∂r)ᵀ = Jᵀ (∂ℓ/∂c)ᵀ, real.
    let grad_r = CVector::from_fn(2 * n, |i, _| {
        if i < n {
            grad.dz[i] + grad.dzbar[i]
        } else {
            (grad.dz[i - n] - grad.dzbar[i - n]) * crate::linalg::J
        }
    });
    let hrr = crate::linalg::to_complex(&asm.hrr);
    let dr = -solve_checked_scaled(&hrr, &as_mat(&grad_r), "H_rr", 0.0)?;
    let j_dr = crate::cr_core::apply_j(&crate::linalg::RVector::from_iterator(2 * n, dr.iter().map(|x| x.re)));
    Ok((
        j_dr,
        CVector::from_column_slice(dcr.as_slice()),
        CVector::from_column_slice(dcc.as_slice()),
    ))
}
