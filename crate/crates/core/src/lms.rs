//! Complex LMS adaptive filter for `η ≈ aᴴξ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CrError, Result};
use crate::linalg::{
    all_finite, hermitian_eigenvalues, hermitian_residual, inf_norm, is_positive_definite, solve_vec_checked,
    CMatrix, CVector, C64,
};
use crate::wirtinger::{ScalarField, WirtingerPair};

/// Stationary signal model: `ξ ~ CN(0, R)`, `η = a_genᴴ ξ + ν` with
/// `ν ~ CN(0, noise_var)` and `a_gen = R⁻¹p`, so that `E{ξη̄} = p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    pub n: usize,
    pub r: CMatrix,
    pub p: CVector,
    pub noise_var: f64,
    pub seed: u64,
    chol: CMatrix,
    a_gen: CVector,
}

impl SignalModel {
    pub fn new(r: CMatrix, p: CVector, noise_var: f64, seed: u64) -> Result<Self> {
        let n = r.nrows();
        if r.ncols() != n || p.len() != n || n == 0 {
            return Err(CrError::Dimension(format!(
                "covariance is {}x{}, cross-moment has length {}",
                r.nrows(),
                r.ncols(),
                p.len()
            )));
        }
        if hermitian_residual(&r) > 1e-10 * inf_norm(&r).max(1.0) {
            return Err(CrError::InvalidArgument("input covariance is not Hermitian".into()));
        }
        let r = (&r + r.adjoint()).scale(0.5);
        if !is_positive_definite(&r) {
            return Err(CrError::InvalidArgument("input covariance is not positive definite".into()));
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(CrError::InvalidArgument(format!("noise variance must be >= 0, got {noise_var}")));
        }
        if !all_finite(&p) {
            return Err(CrError::NonFiniteEvaluation {
                context: "cross-moment vector".into(),
            });
        }
        let chol = nalgebra::Cholesky::new(r.clone())
            .ok_or_else(|| CrError::SingularMatrix {
                which: "input covariance".into(),
            })?
            .unpack();
        let a_gen = solve_vec_checked(&r, &p, "input covariance")?;
        Ok(Self {
            n,
            r,
            p,
            noise_var,
            seed,
            chol,
            a_gen,
        })
    }

    /// Model whose Wiener solution is `a_true` (`p = R a_true`).
    pub fn for_system(r: CMatrix, a_true: &CVector, noise_var: f64, seed: u64) -> Result<Self> {
        if r.ncols() != a_true.len() {
            return Err(CrError::Dimension("covariance and system vector sizes differ".into()));
        }
        let p = &r * a_true;
        Self::new(r, p, noise_var, seed)
    }

    pub fn sampler(&self) -> SignalSampler<'_> {
        SignalSampler {
            model: self,
            rng: ChaCha8Rng::seed_from_u64(self.seed),
        }
    }

    pub fn lambda_max(&self) -> f64 {
        hermitian_eigenvalues(&self.r).last().cloned().unwrap_or(0.0)
    }

    /// Mean-convergence bound `2/λ_max(R)`.
    pub fn step_bound(&self) -> f64 {
        2.0 / self.lambda_max()
    }
}

/// Standard circular complex Gaussian: real and imaginary parts each of variance ½.
pub fn circular_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub struct SignalSampler<'a> {
    model: &'a SignalModel,
    rng: ChaCha8Rng,
}

impl Iterator for SignalSampler<'_> {
    type Item = (CVector, C64);

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.model.n;
        let w = CVector::from_fn(n, |_, _| circular_gaussian(&mut self.rng));
        let xi = &self.model.chol * w;
        let noise = circular_gaussian(&mut self.rng) * self.model.noise_var.sqrt();
        let eta = self.model.a_gen.dotc(&xi) + noise;
        Some((xi, eta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `α_k = α₀ / (k + 1)`.
    Decay(f64),
}

impl StepSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant(a) => a,
            StepSchedule::Decay(a0) => a0 / (k as f64 + 1.0),
        }
    }

    fn base(&self) -> f64 {
        match *self {
            StepSchedule::Constant(a) | StepSchedule::Decay(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmsState {
    pub a_hat: CVector,
    pub k: usize,
    pub schedule: StepSchedule,
}

impl LmsState {
    pub fn new(n: usize, schedule: StepSchedule) -> Self {
        Self {
            a_hat: CVector::zeros(n),
            k: 0,
            schedule,
        }
    }
}

/// `e = η − âᴴξ`.
pub fn error(a_hat: &CVector, xi: &CVector, eta: C64) -> C64 {
    eta - a_hat.dotc(xi)
}

/// `â ← â + α ξ ē`.
pub fn lms_step(s: &LmsState, xi: &CVector, eta: C64) -> LmsState {
    let alpha = s.schedule.at(s.k);
    let e = error(&s.a_hat, xi, eta);
    LmsState {
        a_hat: &s.a_hat + xi * (e.conj() * alpha),
        k: s.k + 1,
        schedule: s.schedule,
    }
}

/// `â ← (I − α ξ ξᴴ) â + α ξ η̄`.
pub fn lms_step_closed_form(s: &LmsState, xi: &CVector, eta: C64) -> LmsState {
    let alpha = s.schedule.at(s.k);
    let proj = xi * xi.dotc(&s.a_hat);
    LmsState {
        a_hat: &s.a_hat - proj * C64::new(alpha, 0.0) + xi * (eta.conj() * alpha),
        k: s.k + 1,
        schedule: s.schedule,
    }
}

/// `∇_a |e|² = −ξ ē`.
pub fn instantaneous_gradient(a_hat: &CVector, xi: &CVector, eta: C64) -> CVector {
    -(xi * error(a_hat, xi, eta).conj())
}

/// `a* = R⁻¹ p`.
pub fn wiener_solution(m: &SignalModel) -> Result<CVector> {
    solve_vec_checked(&m.r, &m.p, "input covariance")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmsRow {
    pub step: usize,
    /// Mean of |e|² over the trailing window; `None` before the first update.
    pub smoothed_e2: Option<f64>,
    pub misalignment: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub rows: Vec<LmsRow>,
    pub a_hat: CVector,
    pub wiener: CVector,
    pub misalignment: f64,
}

pub const SMOOTHING_WINDOW: usize = 100;
const DIVERGENCE_NORM: f64 = 1e9;

/// Runs `steps` LMS updates from `â = 0` on samples drawn from the model.
pub fn simulate(m: &SignalModel, steps: usize, schedule: StepSchedule) -> Result<Simulation> {
    if !(schedule.base() >= 0.0 && schedule.base().is_finite()) {
        return Err(CrError::InvalidArgument("LMS step size must be >= 0".into()));
    }
    let wiener = wiener_solution(m)?;
    let mut state = LmsState::new(m.n, schedule);
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(LmsRow {
        step: 0,
        smoothed_e2: None,
        misalignment: (&state.a_hat - &wiener).norm(),
    });
    let mut window = std::collections::VecDeque::with_capacity(SMOOTHING_WINDOW);
    let mut window_sum = 0.0;
    for (xi, eta) in m.sampler().take(steps) {
        let e2 = error(&state.a_hat, &xi, eta).norm_sqr();
        state = lms_step(&state, &xi, eta);
        let norm = state.a_hat.norm();
        if norm.is_nan() || norm > DIVERGENCE_NORM {
            return Err(CrError::Diverged {
                iteration: state.k,
                reason: format!("|a_hat| = {norm:.3e} exceeded {DIVERGENCE_NORM:.0e}"),
            });
        }
        if window.len() == SMOOTHING_WINDOW {
            window_sum -= window.pop_front().unwrap_or(0.0);
        }
        window.push_back(e2);
        window_sum += e2;
        rows.push(LmsRow {
            step: state.k,
            smoothed_e2: Some(window_sum / window.len() as f64),
            misalignment: (&state.a_hat - &wiener).norm(),
        });
    }
    let misalignment = (&state.a_hat - &wiener).norm();
    Ok(Simulation {
        rows,
        a_hat: state.a_hat,
        wiener,
        misalignment,
    })
}

/// Sample-mean loss `⟨|η − āξ|²⟩` of the scalar problem, with the
/// cogradients `∂ℓ/∂a = −⟨ξ̄e⟩` and `∂ℓ/∂ā = −⟨ξē⟩`.
#[derive(Debug, Clone)]
pub struct SampleLoss {
    xi: Vec<C64>,
    eta: Vec<C64>,
}

impl SampleLoss {
    pub fn new(xi: Vec<C64>, eta: Vec<C64>) -> Result<Self> {
        if xi.len() != eta.len() || xi.is_empty() {
            return Err(CrError::Dimension("need equally many non-zero ξ and η samples".into()));
        }
        Ok(Self { xi, eta })
    }

    pub fn from_model(m: &SignalModel, count: usize) -> Result<Self> {
        if m.n != 1 {
            return Err(CrError::Dimension("sample loss is defined for the scalar model".into()));
        }
        let (xi, eta) = m.sampler().take(count).map(|(x, e)| (x[0], e)).unzip();
        Self::new(xi, eta)
    }

    fn mean(&self, f: impl Fn(C64, C64) -> C64) -> C64 {
        let s: C64 = self.xi.iter().zip(&self.eta).map(|(&x, &e)| f(x, e)).sum();
        s / self.xi.len() as f64
    }

    /// `∂ℓ/∂ā = −⟨ξ ē⟩`.
    pub fn d_abar(&self, a: C64) -> C64 {
        -self.mean(|x, eta| x * (eta - a.conj() * x).conj())
    }

    /// `∂ℓ/∂a = −⟨ξ̄ e⟩`.
    pub fn d_a(&self, a: C64) -> C64 {
        -self.mean(|x, eta| x.conj() * (eta - a.conj() * x))
    }

    /// Zero of the sample cogradient: `⟨ξη̄⟩ / ⟨|ξ|²⟩`.
    pub fn stationary_point(&self) -> C64 {
        self.mean(|x, eta| x * eta.conj()) / self.mean(|x, _| C64::new(x.norm_sqr(), 0.0))
    }
}

impl ScalarField for SampleLoss {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, z: &CVector) -> f64 {
        self.mean(|x, eta| C64::new((eta - z[0].conj() * x).norm_sqr(), 0.0)).re
    }

    fn analytic_cogradients(&self, z: &CVector) -> Option<WirtingerPair> {
        Some(WirtingerPair::new(
            CVector::from_element(1, self.d_a(z[0])),
            CVector::from_element(1, self.d_abar(z[0])),
        ))
    }
}
