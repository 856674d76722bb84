//! First-order CR calculus: cogradients, Jacobian pairs, holomorphy tests,
//! gradients under a constant metric and first-order expansions.
//!
//! Finite differences are taken in the real coordinates and combined as
//! `∂f/∂z = ½(∂f/∂x − j ∂f/∂y)`, `∂f/∂z̄ = ½(∂f/∂x + j ∂f/∂y)`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use crate::cr_core::{ComplexPoint, MetricTensor};
use crate::error::{CrError, Result};
use crate::hessian::HessianBlocks;
use crate::linalg::{all_finite, inf_norm, inf_norm_vec, solve_vec_checked, CMatrix, CVector, C64, J};

/// Conjugation-identity tolerance for analytic cogradients.
pub const CONJ_TOL_ANALYTIC: f64 = 1e-8;
/// Conjugation-identity tolerance for finite-difference cogradients.
pub const CONJ_TOL_FD: f64 = 1e-5;
/// Holomorphy tolerances.
pub const HOLO_TOL_ANALYTIC: f64 = 1e-9;
pub const HOLO_TOL_FD: f64 = 1e-5;
/// Number of random probe points used by [`holomorphy_samples`] by default.
pub const HOLO_SAMPLES: usize = 16;

/// A real-valued function of `z ∈ ℂⁿ`.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, z: &CVector) -> f64;

    fn analytic_cogradients(&self, _z: &CVector) -> Option<WirtingerPair> {
        None
    }

    fn analytic_hessian(&self, _z: &CVector) -> Option<HessianBlocks> {
        None
    }
}

/// A map `ℂⁿ → ℂᵐ`. Complex-valued scalar functions use `m = 1`.
pub trait VectorField: Send + Sync {
    fn dim_in(&self) -> usize;

    fn dim_out(&self) -> usize;

    fn eval(&self, z: &CVector) -> CVector;

    fn analytic_jacobians(&self, _z: &CVector) -> Option<JacobianPair> {
        None
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, z: &CVector) -> f64 {
        (**self).eval(z)
    }
    fn analytic_cogradients(&self, z: &CVector) -> Option<WirtingerPair> {
        (**self).analytic_cogradients(z)
    }
    fn analytic_hessian(&self, z: &CVector) -> Option<HessianBlocks> {
        (**self).analytic_hessian(z)
    }
}

impl<T: VectorField + ?Sized> VectorField for Arc<T> {
    fn dim_in(&self) -> usize {
        (**self).dim_in()
    }
    fn dim_out(&self) -> usize {
        (**self).dim_out()
    }
    fn eval(&self, z: &CVector) -> CVector {
        (**self).eval(z)
    }
    fn analytic_jacobians(&self, z: &CVector) -> Option<JacobianPair> {
        (**self).analytic_jacobians(z)
    }
}

/// Row cogradients `(∂f/∂z, ∂f/∂z̄)`, stored as the entries of the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WirtingerPair {
    pub dz: CVector,
    pub dzbar: CVector,
}

impl WirtingerPair {
    pub fn new(dz: CVector, dzbar: CVector) -> Self {
        Self { dz, dzbar }
    }

    /// Pair for a real field from `∂f/∂z` alone.
    pub fn real_from_dz(dz: CVector) -> Self {
        let dzbar = dz.map(|x| x.conj());
        Self { dz, dzbar }
    }

    /// `(∂f/∂z)ᴴ` as a column.
    pub fn dz_h(&self) -> CVector {
        self.dz.map(|x| x.conj())
    }

    /// `‖∂f/∂z̄ − conj(∂f/∂z)‖∞`.
    pub fn conjugation_residual(&self) -> f64 {
        inf_norm_vec(&(&self.dzbar - self.dz.map(|x| x.conj())))
    }

    /// `∂f/∂z · v + ∂f/∂z̄ · w`.
    pub fn apply(&self, v: &CVector, w: &CVector) -> C64 {
        self.dz.dot(v) + self.dzbar.dot(w)
    }
}

/// Jacobian pair `(J_f, J_f^c) = (∂f/∂z, ∂f/∂z̄)`, each m×n.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianPair {
    pub j: CMatrix,
    pub jc: CMatrix,
}

impl JacobianPair {
    pub fn new(j: CMatrix, jc: CMatrix) -> Self {
        Self { j, jc }
    }

    /// First-order differential `J dz + Jc dz̄`.
    pub fn differential(&self, dz: &CVector) -> CVector {
        &self.j * dz + &self.jc * dz.map(|x| x.conj())
    }
}

type ScalarFn = dyn Fn(&CVector) -> f64 + Send + Sync;
type CogradFn = dyn Fn(&CVector) -> WirtingerPair + Send + Sync;
type HessFn = dyn Fn(&CVector) -> HessianBlocks + Send + Sync;
type VecFn = dyn Fn(&CVector) -> CVector + Send + Sync;
type JacFn = dyn Fn(&CVector) -> JacobianPair + Send + Sync;

/// Closure-backed [`ScalarField`].
#[derive(Clone)]
pub struct FnScalarField {
    n: usize,
    f: Arc<ScalarFn>,
    cograd: Option<Arc<CogradFn>>,
    hess: Option<Arc<HessFn>>,
}

impl FnScalarField {
    pub fn new(n: usize, f: impl Fn(&CVector) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            n,
            f: Arc::new(f),
            cograd: None,
            hess: None,
        }
    }

    pub fn with_cogradients(
        mut self,
        g: impl Fn(&CVector) -> WirtingerPair + Send + Sync + 'static,
    ) -> Self {
        self.cograd = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(
        mut self,
        h: impl Fn(&CVector) -> HessianBlocks + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Arc::new(h));
        self
    }
}

impl ScalarField for FnScalarField {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, z: &CVector) -> f64 {
        (self.f)(z)
    }
    fn analytic_cogradients(&self, z: &CVector) -> Option<WirtingerPair> {
        self.cograd.as_ref().map(|g| g(z))
    }
    fn analytic_hessian(&self, z: &CVector) -> Option<HessianBlocks> {
        self.hess.as_ref().map(|h| h(z))
    }
}

/// Closure-backed [`VectorField`].
#[derive(Clone)]
pub struct FnVectorField {
    n: usize,
    m: usize,
    f: Arc<VecFn>,
    jac: Option<Arc<JacFn>>,
}

impl FnVectorField {
    pub fn new(n: usize, m: usize, f: impl Fn(&CVector) -> CVector + Send + Sync + 'static) -> Self {
        Self {
            n,
            m,
            f: Arc::new(f),
            jac: None,
        }
    }

    pub fn with_jacobians(
        mut self,
        j: impl Fn(&CVector) -> JacobianPair + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Arc::new(j));
        self
    }
}

impl VectorField for FnVectorField {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.m
    }
    fn eval(&self, z: &CVector) -> CVector {
        (self.f)(z)
    }
    fn analytic_jacobians(&self, z: &CVector) -> Option<JacobianPair> {
        self.jac.as_ref().map(|j| j(z))
    }
}

fn check_dim(expected: usize, p: &ComplexPoint) -> Result<()> {
    if p.dim() != expected {
        return Err(CrError::Dimension(format!(
            "field expects n = {expected}, point has n = {}",
            p.dim()
        )));
    }
    Ok(())
}

/// Default central-difference step for a coordinate of magnitude `x`.
pub fn default_step(x: f64) -> f64 {
    x.abs().max(1.0) * f64::EPSILON.cbrt()
}

fn step_for(h: Option<f64>, x: f64) -> Result<f64> {
    match h {
        None => Ok(default_step(x)),
        Some(h) if h > 0.0 && h.is_finite() => Ok(h),
        Some(h) => Err(CrError::InvalidArgument(format!(
            "finite-difference step must be positive, got {h}"
        ))),
    }
}

/// Real partials (∂/∂xᵢ, ∂/∂yᵢ) of every output of `eval`, by central differences.
fn real_partials<T, F>(z: &CVector, h: Option<f64>, eval: F) -> Result<Vec<(T, T)>>
where
    T: Send,
    F: Fn(&CVector, &CVector, f64) -> Result<T> + Sync,
{
    (0..z.len())
        .into_par_iter()
        .map(|i| {
            let hx = step_for(h, z[i].re)?;
            let hy = step_for(h, z[i].im)?;
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += C64::new(hx, 0.0);
            zm[i] -= C64::new(hx, 0.0);
            let dx = eval(&zp, &zm, 2.0 * hx)?;
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += C64::new(0.0, hy);
            zm[i] -= C64::new(0.0, hy);
            let dy = eval(&zp, &zm, 2.0 * hy)?;
            Ok((dx, dy))
        })
        .collect()
}

/// Finite-difference cogradients of a real scalar field.
pub fn cogradients_fd(f: &dyn ScalarField, p: &ComplexPoint, h: Option<f64>) -> Result<WirtingerPair> {
    check_dim(f.dim(), p)?;
    let partials = real_partials(p.z(), h, |zp, zm, width| {
        let (a, b) = (f.eval(zp), f.eval(zm));
        if !a.is_finite() || !b.is_finite() {
            return Err(CrError::NonFiniteEvaluation {
                context: "scalar field probe".into(),
            });
        }
        Ok((a - b) / width)
    })?;
    let n = p.dim();
    let dz = CVector::from_fn(n, |i, _| C64::new(partials[i].0, -partials[i].1) * 0.5);
    let dzbar = CVector::from_fn(n, |i, _| C64::new(partials[i].0, partials[i].1) * 0.5);
    Ok(WirtingerPair { dz, dzbar })
}

/// Finite-difference Jacobian pair of a vector field.
pub fn jacobians_fd(f: &dyn VectorField, p: &ComplexPoint, h: Option<f64>) -> Result<JacobianPair> {
    check_dim(f.dim_in(), p)?;
    let m = f.dim_out();
    let partials = real_partials(p.z(), h, |zp, zm, width| {
        let (a, b) = (f.eval(zp), f.eval(zm));
        if a.len() != m || b.len() != m {
            return Err(CrError::Dimension(format!(
                "vector field declared m = {m} but returned {}",
                a.len()
            )));
        }
        if !all_finite(&a) || !all_finite(&b) {
            return Err(CrError::NonFiniteEvaluation {
                context: "vector field probe".into(),
            });
        }
        Ok((a - b).unscale(width))
    })?;
    let n = p.dim();
    let mut jm = CMatrix::zeros(m, n);
    let mut jc = CMatrix::zeros(m, n);
    for (k, (dx, dy)) in partials.iter().enumerate() {
        for i in 0..m {
            jm[(i, k)] = (dx[i] - J * dy[i]) * 0.5;
            jc[(i, k)] = (dx[i] + J * dy[i]) * 0.5;
        }
    }
    Ok(JacobianPair { j: jm, jc })
}

/// Analytic cogradients when the field provides them, else finite
/// differences; both are checked against `∂f/∂z̄ = conj(∂f/∂z)`.
pub fn cogradients(f: &dyn ScalarField, p: &ComplexPoint) -> Result<WirtingerPair> {
    check_dim(f.dim(), p)?;
    let (pair, tol) = match f.analytic_cogradients(p.z()) {
        Some(pair) => {
            if pair.dz.len() != f.dim() || pair.dzbar.len() != f.dim() {
                return Err(CrError::Dimension("analytic cogradient has wrong length".into()));
            }
            (pair, CONJ_TOL_ANALYTIC)
        }
        None => (cogradients_fd(f, p, None)?, CONJ_TOL_FD),
    };
    if !all_finite(&pair.dz) || !all_finite(&pair.dzbar) {
        return Err(CrError::NonFiniteEvaluation {
            context: "cogradient".into(),
        });
    }
    let scale = inf_norm_vec(&pair.dz).max(1.0);
    let residual = pair.conjugation_residual();
    if residual > tol * scale {
        return Err(CrError::ConjugationMismatch {
            residual,
            tol: tol * scale,
        });
    }
    Ok(pair)
}

/// Analytic Jacobians when available, else finite differences.
pub fn jacobians(f: &dyn VectorField, p: &ComplexPoint) -> Result<JacobianPair> {
    check_dim(f.dim_in(), p)?;
    match f.analytic_jacobians(p.z()) {
        Some(jp) => {
            if jp.j.shape() != (f.dim_out(), f.dim_in()) || jp.jc.shape() != jp.j.shape() {
                return Err(CrError::Dimension("analytic Jacobian has wrong shape".into()));
            }
            Ok(jp)
        }
        None => jacobians_fd(f, p, None),
    }
}

/// ‖analytic − FD‖∞ for the cogradient pair, or `None` without analytic cogradients.
pub fn analytic_vs_fd_residual(f: &dyn ScalarField, p: &ComplexPoint) -> Result<Option<f64>> {
    let Some(a) = f.analytic_cogradients(p.z()) else {
        return Ok(None);
    };
    let fd = cogradients_fd(f, p, None)?;
    let r = inf_norm_vec(&(&a.dz - &fd.dz)).max(inf_norm_vec(&(&a.dzbar - &fd.dzbar)));
    Ok(Some(r))
}

/// Result of a holomorphy test.
#[derive(Debug, Clone, PartialEq)]
pub struct HolomorphyReport {
    pub holomorphic: bool,
    /// Largest ‖J_f^c‖∞ over the samples.
    pub max_residual: f64,
    pub tol: f64,
}

/// The query point plus `count` points drawn from a complex Gaussian ball of
/// radius 1 around it (Gaussian direction, radius uniform in [0, 1]).
pub fn holomorphy_samples(p: &ComplexPoint, count: usize, seed: u64) -> Vec<ComplexPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = Uniform::new_inclusive(0.0, 1.0).expect("valid range");
    let n = p.dim();
    let mut out = vec![p.clone()];
    for _ in 0..count {
        let dir = CVector::from_fn(n, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        });
        let norm = dir.norm();
        let r = radius.sample(&mut rng);
        let step = if norm > 0.0 { dir.unscale(norm).scale(r) } else { dir };
        out.push(ComplexPoint::new(p.z() + step).expect("finite sample"));
    }
    out
}

/// Tests the Cauchy-Riemann condition `J_f^c = 0` at every sample point.
/// `tol = None` picks the analytic or finite-difference default.
pub fn is_holomorphic(
    f: &dyn VectorField,
    points: &[ComplexPoint],
    tol: Option<f64>,
) -> Result<HolomorphyReport> {
    if points.is_empty() {
        return Err(CrError::InvalidArgument("holomorphy test needs at least one sample".into()));
    }
    let mut max_residual: f64 = 0.0;
    let mut analytic = true;
    for p in points {
        analytic &= f.analytic_jacobians(p.z()).is_some();
        let jp = jacobians(f, p)?;
        max_residual = max_residual.max(inf_norm(&jp.jc));
    }
    let tol = tol.unwrap_or(if analytic { HOLO_TOL_ANALYTIC } else { HOLO_TOL_FD });
    Ok(HolomorphyReport {
        holomorphic: max_residual <= tol,
        max_residual,
        tol,
    })
}

/// Holomorphy test around `p` with the default sample set.
pub fn is_holomorphic_near(f: &dyn VectorField, p: &ComplexPoint, seed: u64) -> Result<HolomorphyReport> {
    is_holomorphic(f, &holomorphy_samples(p, HOLO_SAMPLES, seed), None)
}

/// `∇f = Ω⁻¹ (∂f/∂z)ᴴ`.
pub fn gradient(f: &dyn ScalarField, p: &ComplexPoint, omega: &MetricTensor) -> Result<CVector> {
    if omega.dim() != p.dim() {
        return Err(CrError::Dimension("metric and point dimensions differ".into()));
    }
    let pair = cogradients(f, p)?;
    solve_vec_checked(omega.matrix(), &pair.dz_h(), "metric tensor")
}

/// ‖∂f/∂z‖∞.
pub fn stationarity_residual(f: &dyn ScalarField, p: &ComplexPoint) -> Result<f64> {
    Ok(inf_norm_vec(&cogradients(f, p)?.dz))
}

/// `f(p) + 2 Re{∂f/∂z · Δz}`.
pub fn first_order_predict(f: &dyn ScalarField, p: &ComplexPoint, dz: &CVector) -> Result<f64> {
    if dz.len() != p.dim() {
        return Err(CrError::Dimension("step and point dimensions differ".into()));
    }
    let pair = cogradients(f, p)?;
    Ok(f.eval(p.z()) + 2.0 * pair.dz.dot(dz).re)
}

/// The linear term of the expansion written in the r, c and z
/// representations: `(∂f/∂r)Δr`, `(∂f/∂c)Δc` and `2Re{(∂f/∂z)Δz}`.
pub fn first_order_terms(pair: &WirtingerPair, dz: &CVector) -> [f64; 3] {
    let n = dz.len();
    let mut r_term = 0.0;
    for i in 0..n {
        let fx = 2.0 * pair.dz[i].re;
        let fy = -2.0 * pair.dz[i].im;
        r_term += fx * dz[i].re + fy * dz[i].im;
    }
    let c_term = pair.apply(dz, &dz.map(|x| x.conj())).re;
    let z_term = 2.0 * pair.dz.dot(dz).re;
    [r_term, c_term, z_term]
}
