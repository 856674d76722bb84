//! Identity checks run by `crcalc check`.
//!
//! Every check reports a residual, the tolerance it is held to, and whether
//! it passed. Residuals are relative to the size of the quantity involved
//! (floored at 1) unless noted otherwise.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cr_core::{admissibility_residual_matrix, project_admissible, ComplexPoint, StructureMatrices};
use crate::error::CrError;
use crate::hessian::{
    assemble, hessian_quad, hessian_quad_fd, hrr_by_real_fd, quarter_j_m_jh, relative_residual_real,
    second_order_terms, HessianBlocks, SYM_TOL_ANALYTIC, SYM_TOL_FD,
};
use crate::linalg::{
    hermitian_eigenvalues, inf_norm, inf_norm_real, inf_norm_vec, singular_values, symmetric_eigenvalues,
    to_complex, CMatrix, CVector, C64,
};
use crate::lsq::LsqProblem;
use crate::problems::{example1_closed_form, linear_model, Example1Loss, Example1Problem};
use crate::wirtinger::{
    cogradients, cogradients_fd, first_order_terms, is_holomorphic_near, stationarity_residual, FnScalarField,
    ScalarField, VectorField, WirtingerPair, CONJ_TOL_ANALYTIC, CONJ_TOL_FD,
};

/// Tolerance for identities that hold up to rounding.
pub const EXACT_TOL: f64 = 1e-10;
/// Tolerance for the structure-matrix identities.
pub const STRUCT_TOL: f64 = 1e-12;
/// Tolerance for comparisons against finite-difference oracles.
pub const FD_TOL: f64 = 1e-4;
/// Analytic cogradient vs finite differences.
pub const COGRAD_FD_TOL: f64 = 1e-6;
/// Eigenvalue and singular-value relations.
pub const SPECTRAL_TOL: f64 = 1e-8;

const SAMPLE_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    fn push(&mut self, name: &str, residual: f64, tol: f64) {
        self.lines.push(CheckLine {
            name: name.into(),
            residual,
            tol,
            passed: residual <= tol,
            note: None,
        });
    }

    fn push_note(&mut self, name: &str, residual: f64, tol: f64, passed: bool, note: impl Into<String>) {
        self.lines.push(CheckLine {
            name: name.into(),
            residual,
            tol,
            passed,
            note: Some(note.into()),
        });
    }

    fn push_error(&mut self, name: &str, err: &CrError) {
        let (residual, tol) = match err {
            CrError::ConjugationMismatch { residual, tol }
            | CrError::SymmetryViolation { residual, tol }
            | CrError::RelationViolation { residual, tol, .. } => (*residual, *tol),
            _ => (f64::NAN, f64::NAN),
        };
        self.push_note(name, residual, tol, false, format!("{}: {err}", error_name(err)));
    }

    pub fn passed(&self) -> usize {
        self.lines.iter().filter(|l| l.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.lines.len() - self.passed()
    }

    pub fn all_passed(&self) -> bool {
        self.failed() == 0
    }

    pub fn find(&self, name: &str) -> Option<&CheckLine> {
        self.lines.iter().find(|l| l.name == name)
    }

    pub fn render(&self) -> String {
        self.render_lines(false)
    }

    /// Only the failed lines, followed by the full summary.
    pub fn render_failures(&self) -> String {
        self.render_lines(true)
    }

    fn render_lines(&self, failures_only: bool) -> String {
        let mut s = String::new();
        for l in self.lines.iter().filter(|l| !failures_only || !l.passed) {
            let _ = write!(
                s,
                "{}  {:<52} residual {:>10.3e}  tol {:.1e}",
                if l.passed { "PASS" } else { "FAIL" },
                l.name,
                l.residual,
                l.tol
            );
            if let Some(n) = &l.note {
                let _ = write!(s, "  ({n})");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "{} passed, {} failed", self.passed(), self.failed());
        s
    }
}

/// Variant name of an error, as shown in reports.
pub fn error_name(e: &CrError) -> &'static str {
    match e {
        CrError::Dimension(_) => "Dimension",
        CrError::InadmissibleVector { .. } => "InadmissibleVector",
        CrError::SingularMatrix { .. } => "SingularMatrix",
        CrError::NonFiniteEvaluation { .. } => "NonFiniteEvaluation",
        CrError::ConjugationMismatch { .. } => "ConjugationMismatch",
        CrError::SymmetryViolation { .. } => "SymmetryViolation",
        CrError::RelationViolation { .. } => "RelationViolation",
        CrError::SingularQ { .. } => "SingularQ",
        CrError::InadmissibleQ { .. } => "InadmissibleQ",
        CrError::UnsupportedStrategy { .. } => "UnsupportedStrategy",
        CrError::Diverged { .. } => "Diverged",
        CrError::Unidentifiable { .. } => "Unidentifiable",
        CrError::InvalidArgument(_) => "InvalidArgument",
    }
}

fn random_c(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    C64::new(rng.random_range(-r..r), rng.random_range(-r..r))
}

fn sample_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<ComplexPoint> {
    (0..SAMPLE_POINTS)
        .map(|_| ComplexPoint::new(CVector::from_fn(n, |_, _| random_c(rng, 2.0))).expect("finite"))
        .collect()
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = v.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
    (hi - lo) / scale
}

fn raw_cogradients(f: &dyn ScalarField, p: &ComplexPoint) -> crate::Result<(WirtingerPair, f64)> {
    match f.analytic_cogradients(p.z()) {
        Some(pair) => Ok((pair, CONJ_TOL_ANALYTIC)),
        None => Ok((cogradients_fd(f, p, None)?, CONJ_TOL_FD)),
    }
}

/// First-order checks on a real-valued field.
pub fn cogradient_checks(f: &dyn ScalarField, points: &[ComplexPoint], seed: u64, report: &mut CheckReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc09a);
    let name = "conjugate cogradient identity for a real loss";
    let mut worst: f64 = 0.0;
    let mut tol = CONJ_TOL_ANALYTIC;
    let mut failure = None;
    for p in points {
        match raw_cogradients(f, p) {
            Ok((pair, t)) => {
                tol = t;
                worst = worst.max(pair.conjugation_residual() / inf_norm_vec(&pair.dz).max(1.0));
            }
            Err(e) => failure = Some(e),
        }
        if failure.is_none() {
            if let Err(e) = cogradients(f, p) {
                failure = Some(e);
            }
        }
    }
    match failure {
        Some(e) => report.push_error(name, &e),
        None => report.push(name, worst, tol),
    }

    if f.analytic_cogradients(points[0].z()).is_some() {
        let mut worst: f64 = 0.0;
        for p in points {
            let a = f.analytic_cogradients(p.z()).expect("analytic");
            match cogradients_fd(f, p, None) {
                Ok(fd) => {
                    let r = inf_norm_vec(&(&a.dz - &fd.dz)).max(inf_norm_vec(&(&a.dzbar - &fd.dzbar)));
                    worst = worst.max(r / inf_norm_vec(&a.dz).max(1.0));
                }
                Err(_) => worst = f64::INFINITY,
            }
        }
        report.push("analytic cogradient matches finite differences", worst, COGRAD_FD_TOL);
    }

    let mut worst: f64 = 0.0;
    for p in points {
        let Ok((pair, _)) = raw_cogradients(f, p) else {
            worst = f64::INFINITY;
            continue;
        };
        let dz = CVector::from_fn(p.dim(), |_, _| random_c(&mut rng, 1.0));
        worst = worst.max(spread(&first_order_terms(&pair, &dz)));
    }
    report.push("first-order term equal in r, c and z coordinates", worst, EXACT_TOL);
}

/// Second-order checks: block identities, assembly relations, spectra and
/// expansion terms.
pub fn hessian_checks(f: &dyn ScalarField, points: &[ComplexPoint], seed: u64, report: &mut CheckReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4e55);
    let analytic = f.analytic_hessian(points[0].z()).is_some();
    let mut quads = Vec::new();
    let name = "Hessian block identities before symmetrization";
    let tol = if analytic { SYM_TOL_ANALYTIC } else { SYM_TOL_FD };
    let mut worst: f64 = 0.0;
    for p in points {
        match hessian_quad(f, p) {
            Ok(q) => {
                worst = worst.max(q.presym_residual);
                quads.push((p.clone(), q));
            }
            Err(e) => {
                report.push_error(name, &e);
                return;
            }
        }
    }
    report.push(name, worst, tol);

    if analytic {
        let mut worst: f64 = 0.0;
        for (p, q) in &quads {
            worst = match hessian_quad_fd(f, p) {
                Ok(fd) => worst.max(inf_norm(&(q.hc() - fd.hc())) / inf_norm(&q.hc()).max(1.0)),
                Err(_) => f64::INFINITY,
            };
        }
        report.push("analytic Hessian matches finite differences", worst, FD_TOL);
    }

    let mut fd_rr: f64 = 0.0;
    let mut back: f64 = 0.0;
    let mut real_form: f64 = 0.0;
    let mut eig: f64 = 0.0;
    let mut sv: f64 = 0.0;
    let mut adm: f64 = 0.0;
    let mut second: f64 = 0.0;
    for (p, q) in &quads {
        let asm = match assemble(q) {
            Ok(a) => a,
            Err(e) => {
                report.push_error("real and complex Hessians are related", &e);
                return;
            }
        };
        let hc = &asm.hc_complex;
        let n = q.dim();
        let scale = inf_norm(hc).max(1.0);
        fd_rr = fd_rr.max(relative_residual_real(&asm.hrr, &hrr_by_real_fd(f, p)));
        back = back.max(inf_norm(&(quarter_j_m_jh(&to_complex(&asm.hrr)) - hc)) / scale);
        let s = StructureMatrices::new(n).s_complex();
        real_form = real_form.max(inf_norm(&(&asm.hc_real - &s * hc)) / scale);

        let ec = hermitian_eigenvalues(hc);
        let er = symmetric_eigenvalues(&asm.hrr);
        let escale = inf_norm_real(&asm.hrr).max(1.0);
        for (a, b) in er.iter().zip(&ec) {
            eig = eig.max((a - 2.0 * b).abs() / escale);
        }
        let (s1, s2) = (singular_values(hc), singular_values(&asm.hc_real));
        for (a, b) in s1.iter().zip(&s2) {
            sv = sv.max((a - b).abs() / scale);
        }
        adm = adm.max(admissibility_residual_matrix(hc).unwrap_or(f64::INFINITY) / scale);

        let dz = CVector::from_fn(n, |_, _| random_c(&mut rng, 1.0));
        second = second.max(match second_order_terms(q, &dz) {
            Ok(t) => spread(&t),
            Err(_) => f64::INFINITY,
        });
    }
    report.push("real Hessian matches plain second differences", fd_rr, FD_TOL);
    report.push("complex Hessian recovered as ¼ J H_rr Jᴴ", back, EXACT_TOL);
    report.push("real-form Hessian equals S times complex Hessian", real_form, EXACT_TOL);
    report.push("real Hessian eigenvalues are twice the complex ones", eig, SPECTRAL_TOL);
    report.push("real-form and complex Hessians share singular values", sv, SPECTRAL_TOL);
    report.push("complex Hessian is admissible", adm, EXACT_TOL);
    report.push("second-order term equal in all four representations", second, EXACT_TOL);
}

/// Identities of the structure matrices `J`, `S`, `C` for dimension `n`, and
/// of the admissible projector on random matrices.
pub fn structure_checks(n: usize, seed: u64, report: &mut CheckReport) {
    let sm = StructureMatrices::new(n);
    let j = sm.j();
    let s = sm.s_complex();
    let c = sm.c_complex();
    let id = CMatrix::identity(2 * n, 2 * n);
    report.push("J inverse equals half its adjoint", inf_norm(&(&j.adjoint().scale(0.5) * &j - &id)), STRUCT_TOL);
    report.push("swap matrix squares to identity", inf_norm(&(&s * &s - &id)), STRUCT_TOL);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    report.push("det S = (-1)^n", (sm.det_s() - sign).abs(), STRUCT_TOL);
    report.push("C = ½ Jᴴ S J", inf_norm(&(j.adjoint() * &s * &j * C64::new(0.5, 0.0) - &c)), STRUCT_TOL);
    report.push("I = ½ Jᵀ S J", inf_norm(&(j.transpose() * &s * &j * C64::new(0.5, 0.0) - &id)), STRUCT_TOL);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
    let mut idem: f64 = 0.0;
    let mut adm: f64 = 0.0;
    for _ in 0..8 {
        let m = CMatrix::from_fn(2 * n, 2 * n, |_, _| random_c(&mut rng, 1.0));
        let p1 = project_admissible(&m).expect("even size");
        let p2 = project_admissible(&p1).expect("even size");
        let scale = inf_norm(&m).max(1.0);
        idem = idem.max(inf_norm(&(&p2 - &p1)) / scale);
        adm = adm.max(admissibility_residual_matrix(&p1).expect("even size") / scale);
    }
    report.push("admissible projector is idempotent", idem, EXACT_TOL);
    report.push("projector output is admissible", adm, EXACT_TOL);
}

/// Replaces `∂f/∂z̄` by a perturbed value so that the conjugation identity
/// fails; a negative control for the checker.
#[derive(Debug, Clone)]
pub struct CorruptedCogradient<F> {
    pub inner: F,
    pub offset: C64,
}

impl<F: ScalarField> ScalarField for CorruptedCogradient<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, z: &CVector) -> f64 {
        self.inner.eval(z)
    }

    fn analytic_cogradients(&self, z: &CVector) -> Option<WirtingerPair> {
        let p = self.inner.analytic_cogradients(z)?;
        let dzbar = p.dzbar.map(|x| x + self.offset);
        Some(WirtingerPair::new(p.dz, dzbar))
    }

    fn analytic_hessian(&self, z: &CVector) -> Option<HessianBlocks> {
        self.inner.analytic_hessian(z)
    }
}

fn example1_extras(p: &Example1Problem, f: &dyn ScalarField, seed: u64, report: &mut CheckReport) {
    let name = "closed-form optimum is stationary";
    match example1_closed_form(p) {
        Ok(z) => match ComplexPoint::from_slice(&[z]).and_then(|pt| stationarity_residual(f, &pt)) {
            Ok(r) => report.push(name, r, EXACT_TOL),
            Err(e) => report.push_error(name, &e),
        },
        Err(e) => report.push_note(name, 0.0, EXACT_TOL, true, format!("skipped: {e}")),
    }

    let name = "Hessian equals its closed form";
    match hessian_quad(f, &ComplexPoint::zeros(1)) {
        Ok(q) => {
            let cf = p.hessian_closed_form();
            report.push(name, inf_norm(&(q.hc() - &cf)) / inf_norm(&cf).max(1.0), EXACT_TOL)
        }
        Err(e) => report.push_error(name, &e),
    }

    let g = linear_model(p.alpha, p.beta);
    let expected = p.beta == C64::new(0.0, 0.0);
    model_holomorphy(&g, 1, expected, seed, report);
}

fn model_holomorphy(g: &dyn VectorField, n: usize, expected: bool, seed: u64, report: &mut CheckReport) {
    let name = "model holomorphy classification";
    match is_holomorphic_near(g, &ComplexPoint::zeros(n), seed) {
        Ok(h) => {
            let label = if h.holomorphic { "holomorphic" } else { "nonholomorphic" };
            let want = if expected { "holomorphic" } else { "nonholomorphic" };
            report.push_note(
                name,
                h.max_residual,
                h.tol,
                h.holomorphic == expected,
                format!("classified {label}, expected {want}"),
            );
        }
        Err(e) => report.push_error(name, &e),
    }
}

fn lsq_extras(lsq: &LsqProblem, points: &[ComplexPoint], report: &mut CheckReport) {
    let plain = {
        let prob = lsq.clone();
        FnScalarField::new(lsq.n(), move |z| prob.eval(z))
    };
    let mut adm: f64 = 0.0;
    let mut nh_fd: f64 = 0.0;
    let mut psd: f64 = 0.0;
    for p in points {
        let res = (|| -> crate::Result<(f64, f64, f64)> {
            let cg = lsq.loss_cogradient(p)?;
            let a = crate::cr_core::admissibility_residual_vector(&cg.col)? / inf_norm_vec(&cg.col).max(1.0);
            let nh = lsq.newton_hessian(p)?;
            let fd = hessian_quad_fd(&plain, p)?.hc();
            let d = inf_norm(&(&nh - &fd)) / inf_norm(&fd).max(1.0);
            let gn = lsq.gauss_newton_hessian(p)?;
            let min = hermitian_eigenvalues(&gn)[0];
            Ok((a, d, (-min).max(0.0) / inf_norm(&gn).max(1.0)))
        })();
        match res {
            Ok((a, d, m)) => {
                adm = adm.max(a);
                nh_fd = nh_fd.max(d);
                psd = psd.max(m);
            }
            Err(e) => {
                report.push_error("least-squares Hessians", &e);
                return;
            }
        }
    }
    report.push("least-squares loss cogradient is admissible", adm, EXACT_TOL);
    report.push("Newton Hessian matches finite-difference Hessian", nh_fd, FD_TOL);
    report.push("Gauss-Newton Hessian is positive semidefinite", psd, EXACT_TOL);
}

/// The problem a check run is about.
pub enum CheckTarget<'a> {
    Example1 { problem: &'a Example1Problem, corrupt: bool },
    Example2 { problem: &'a Example1Problem },
    Lsq { problem: &'a LsqProblem, holomorphic_model: bool },
}

pub fn run_checks(target: CheckTarget<'_>, seed: u64) -> CheckReport {
    let mut report = CheckReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match target {
        CheckTarget::Example1 { problem, corrupt } => {
            let points = sample_points(1, &mut rng);
            let loss = Example1Loss {
                problem: problem.clone(),
            };
            let field: Box<dyn ScalarField> = if corrupt {
                Box::new(CorruptedCogradient {
                    inner: loss,
                    offset: C64::new(0.25, -0.5),
                })
            } else {
                Box::new(loss)
            };
            cogradient_checks(field.as_ref(), &points, seed, &mut report);
            hessian_checks(field.as_ref(), &points, seed, &mut report);
            example1_extras(problem, field.as_ref(), seed, &mut report);
            structure_checks(1, seed, &mut report);
        }
        CheckTarget::Example2 { problem } => {
            let points = sample_points(1, &mut rng);
            match crate::problems::example2_as_lsq(problem) {
                Ok(lsq) => {
                    cogradient_checks(&lsq, &points, seed, &mut report);
                    hessian_checks(&lsq, &points, seed, &mut report);
                    lsq_extras(&lsq, &points, &mut report);
                    let mut worst: f64 = 0.0;
                    for p in &points {
                        worst = match (lsq.newton_hessian(p), lsq.gauss_newton_hessian(p)) {
                            (Ok(a), Ok(b)) => worst.max(inf_norm(&(a - b))),
                            _ => f64::INFINITY,
                        };
                    }
                    report.push("Newton Hessian equals Gauss-Newton Hessian", worst, 1e-12);
                    example1_extras(problem, &lsq, seed, &mut report);
                }
                Err(e) => report.push_error("least-squares formulation", &e),
            }
            structure_checks(1, seed, &mut report);
        }
        CheckTarget::Lsq {
            problem,
            holomorphic_model,
        } => {
            let points = sample_points(problem.n(), &mut rng);
            cogradient_checks(problem, &points, seed, &mut report);
            hessian_checks(problem, &points, seed, &mut report);
            lsq_extras(problem, &points, &mut report);
            model_holomorphy(problem.model().as_ref(), problem.n(), holomorphic_model, seed, &mut report);
            structure_checks(problem.n(), seed, &mut report);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(alpha: C64, beta: C64) -> Example1Problem {
        Example1Problem::synthetic(alpha, beta, C64::new(0.5, -0.25), 0.1, 200, 1).unwrap()
    }

    #[test]
    fn example_suites_pass() {
        let p = problem(C64::new(1.0, 1.0), C64::new(0.3, 0.0));
        let r = run_checks(CheckTarget::Example1 { problem: &p, corrupt: false }, 1);
        assert!(r.all_passed(), "{}", r.render());
        let r = run_checks(CheckTarget::Example2 { problem: &p }, 1);
        assert!(r.all_passed(), "{}", r.render());
    }

    #[test]
    fn corrupted_gradient_is_reported() {
        let p = problem(C64::new(1.0, 1.0), C64::new(0.3, 0.0));
        let r = run_checks(CheckTarget::Example1 { problem: &p, corrupt: true }, 1);
        let line = r.find("conjugate cogradient identity for a real loss").unwrap();
        assert!(!line.passed);
        assert!(line.note.as_deref().unwrap().starts_with("ConjugationMismatch"));
    }

    #[test]
    fn holomorphy_flag_follows_beta() {
        for (beta, want) in [(C64::new(0.0, 0.0), "classified holomorphic"), (C64::new(0.3, 0.0), "classified nonholomorphic")] {
            let p = problem(C64::new(1.0, 1.0), beta);
            let r = run_checks(CheckTarget::Example1 { problem: &p, corrupt: false }, 2);
            let line = r.find("model holomorphy classification").unwrap();
            assert!(line.passed);
            assert!(line.note.as_deref().unwrap().starts_with(want));
        }
    }
}
