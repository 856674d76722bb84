//! Run configuration, read from TOML.
//!
//! ```toml
//! problem = "example1"          # example1 | example2 | lms | custom-polynomial
//! algorithm = "newton"          # identity | newton | quasi_newton | gauss_newton | quasi_gauss_newton
//! seed = 1
//!
//! [optimizer]
//! step = 1.0
//! max_iters = 1000
//! grad_tol = 1e-8
//! backtracking = "off"          # off | armijo
//! armijo_beta = 0.5
//! armijo_c1 = 1e-4
//! damping = 0.0
//! z0 = ["0+0j"]
//!
//! [example]
//! alpha = "1+1j"
//! beta = "0.3"
//! z_true = "0.5-0.25j"
//! noise_var = 0.1
//! n_samples = 200
//!
//! [lms]
//! n = 4
//! step = 0.05
//! steps = 5000
//! schedule = "constant"         # constant | decay
//! noise_var = 0.0
//! a_true = ["1", "-1j", "0.5+0.5j", "0"]    # optional
//! covariance = [["1", "0"], ["0", "1"]]     # optional, n×n rows
//!
//! [custom]
//! n = 1
//! data = ["1+1j"]
//! weight = [["1"]]                          # optional
//! [[custom.components]]
//! terms = [{ coef = "1", z = [2], zbar = [0] }, { coef = "0.5j", z = [0], zbar = [1] }]
//!
//! [output]
//! trace = "trace.csv"
//! ```
//!
//! Complex values are strings such as `"1-2j"`, `"0.5j"` or `"3"`, or plain numbers.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::linalg::{CMatrix, CVector, C64};
use crate::lms::{SignalModel, StepSchedule};
use crate::optim::{Backtracking, OptimizerConfig, QKind, QStrategy};
use crate::poly::{ComplexPoly, Term};
use crate::problems::Example1Problem;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

fn bad(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Example1,
    Example2,
    Lms,
    CustomPolynomial,
}

impl std::str::FromStr for ProblemKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> CResult<Self> {
        match s {
            "example1" => Ok(Self::Example1),
            "example2" => Ok(Self::Example2),
            "lms" => Ok(Self::Lms),
            "custom-polynomial" | "custom_polynomial" => Ok(Self::CustomPolynomial),
            other => Err(bad("problem", format!("unknown problem '{other}'"))),
        }
    }
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Lms => "lms",
            Self::CustomPolynomial => "custom-polynomial",
        }
    }
}

/// A complex scalar as written in the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Number(f64),
    Text(String),
}

impl ComplexValue {
    pub fn parse(&self, field: &str) -> CResult<C64> {
        let v = match self {
            ComplexValue::Number(x) => C64::new(*x, 0.0),
            ComplexValue::Text(s) => parse_complex(s).map_err(|e| bad(field, e))?,
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(bad(field, "value must be finite"));
        }
        Ok(v)
    }
}

/// Parses `"a+bj"`-style complex literals.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    t.parse::<C64>()
        .map_err(|_| format!("cannot parse '{s}' as a complex number (expected a form like 1-2j)"))
}

fn parse_vec(v: &[ComplexValue], field: &str) -> CResult<CVector> {
    let items = v
        .iter()
        .enumerate()
        .map(|(i, x)| x.parse(&format!("{field}[{i}]")))
        .collect::<CResult<Vec<_>>>()?;
    Ok(CVector::from_vec(items))
}

fn parse_matrix(rows: &[Vec<ComplexValue>], n: usize, field: &str) -> CResult<CMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(bad(field, format!("expected {n} rows of {n} entries")));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = x.parse(&format!("{field}[{i}][{j}]"))?;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BacktrackingKind {
    Off,
    Armijo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Decay,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub step: Option<f64>,
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub backtracking: Option<BacktrackingKind>,
    pub armijo_beta: Option<f64>,
    pub armijo_c1: Option<f64>,
    pub damping: Option<f64>,
    pub z0: Option<Vec<ComplexValue>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleSection {
    pub alpha: Option<ComplexValue>,
    pub beta: Option<ComplexValue>,
    pub z_true: Option<ComplexValue>,
    pub noise_var: Option<f64>,
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmsSection {
    pub n: Option<usize>,
    pub step: Option<f64>,
    pub steps: Option<usize>,
    pub schedule: Option<ScheduleKind>,
    pub noise_var: Option<f64>,
    pub a_true: Option<Vec<ComplexValue>>,
    pub covariance: Option<Vec<Vec<ComplexValue>>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSection {
    pub coef: ComplexValue,
    #[serde(default)]
    pub z: Vec<u32>,
    #[serde(default)]
    pub zbar: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSection {
    pub terms: Vec<TermSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSection {
    pub n: usize,
    pub data: Vec<ComplexValue>,
    pub weight: Option<Vec<Vec<ComplexValue>>>,
    pub components: Vec<ComponentSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<ProblemKind>,
    pub algorithm: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub example: ExampleSection,
    #[serde(default)]
    pub lms: LmsSection,
    pub custom: Option<CustomSection>,
    #[serde(default)]
    pub output: OutputSection,
}

pub const MAX_DIM: usize = 64;
pub const MAX_ITERS: usize = 1_000_000;
pub const MAX_SAMPLES: usize = 10_000_000;
pub const MAX_LMS_STEPS: usize = 100_000_000;
pub const DEFAULT_SEED: u64 = 1;

impl RunConfig {
    pub fn from_toml(text: &str) -> CResult<Self> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> CResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn problem(&self) -> ProblemKind {
        self.problem.unwrap_or(ProblemKind::Example1)
    }

    pub fn algorithm(&self) -> CResult<QKind> {
        match &self.algorithm {
            None => Ok(QKind::Newton),
            Some(s) => s.parse().map_err(|e: crate::CrError| bad("algorithm", e)),
        }
    }

    pub fn strategy(&self) -> CResult<QStrategy> {
        let damping = self.optimizer.damping.unwrap_or(0.0);
        QStrategy::damped(self.algorithm()?, damping).map_err(|e| bad("optimizer.damping", e))
    }

    pub fn optimizer_config(&self) -> CResult<OptimizerConfig> {
        let o = &self.optimizer;
        let mut cfg = OptimizerConfig::default_for(self.algorithm()?);
        if let Some(s) = o.step {
            cfg.step = s;
        }
        if let Some(m) = o.max_iters {
            if m > MAX_ITERS {
                return Err(bad("optimizer.max_iters", format!("must be at most {MAX_ITERS}")));
            }
            cfg.max_iters = m;
        }
        if let Some(t) = o.grad_tol {
            cfg.grad_tol = t;
        }
        let armijo_params = o.armijo_beta.is_some() || o.armijo_c1.is_some();
        cfg.backtracking = match o.backtracking {
            Some(BacktrackingKind::Armijo) => Backtracking::Armijo {
                beta: o.armijo_beta.unwrap_or(0.5),
                c1: o.armijo_c1.unwrap_or(1e-4),
            },
            Some(BacktrackingKind::Off) if armijo_params => {
                return Err(bad("optimizer.armijo_beta", "Armijo parameters given but backtracking is off"));
            }
            _ if armijo_params => Backtracking::Armijo {
                beta: o.armijo_beta.unwrap_or(0.5),
                c1: o.armijo_c1.unwrap_or(1e-4),
            },
            _ => Backtracking::Off,
        };
        cfg.validate().map_err(|e| bad("optimizer", e))?;
        Ok(cfg)
    }

    /// Start point, zeros by default.
    pub fn z0(&self, n: usize) -> CResult<CVector> {
        match &self.optimizer.z0 {
            None => Ok(CVector::zeros(n)),
            Some(v) => {
                if v.len() != n {
                    return Err(bad("optimizer.z0", format!("expected {n} entries, got {}", v.len())));
                }
                parse_vec(v, "optimizer.z0")
            }
        }
    }

    pub fn example_problem(&self) -> CResult<Example1Problem> {
        let e = &self.example;
        let get = |v: &Option<ComplexValue>, field: &str, default: C64| -> CResult<C64> {
            v.as_ref().map(|x| x.parse(field)).unwrap_or(Ok(default))
        };
        let alpha = get(&e.alpha, "example.alpha", C64::new(1.0, 1.0))?;
        let beta = get(&e.beta, "example.beta", C64::new(0.3, 0.0))?;
        let z_true = get(&e.z_true, "example.z_true", C64::new(0.5, -0.25))?;
        let noise = e.noise_var.unwrap_or(0.1);
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(bad("example.noise_var", "must be >= 0"));
        }
        let m = e.n_samples.unwrap_or(200);
        if m == 0 || m > MAX_SAMPLES {
            return Err(bad("example.n_samples", format!("must be in 1..={MAX_SAMPLES}")));
        }
        Example1Problem::synthetic(alpha, beta, z_true, noise, m, self.seed()).map_err(|e| bad("example", e))
    }

    pub fn lms_settings(&self) -> CResult<LmsSettings> {
        let l = &self.lms;
        let n = l.n.unwrap_or(4);
        if n == 0 || n > MAX_DIM {
            return Err(bad("lms.n", format!("must be in 1..={MAX_DIM}")));
        }
        let step = l.step.unwrap_or(0.05);
        if !(step >= 0.0 && step.is_finite()) {
            return Err(bad("lms.step", "must be >= 0"));
        }
        let steps = l.steps.unwrap_or(5000);
        if steps > MAX_LMS_STEPS {
            return Err(bad("lms.steps", format!("must be at most {MAX_LMS_STEPS}")));
        }
        let noise = l.noise_var.unwrap_or(0.0);
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(bad("lms.noise_var", "must be >= 0"));
        }
        let r = match &l.covariance {
            None => CMatrix::identity(n, n),
            Some(rows) => parse_matrix(rows, n, "lms.covariance")?,
        };
        let a_true = match &l.a_true {
            Some(v) => {
                if v.len() != n {
                    return Err(bad("lms.a_true", format!("expected {n} entries, got {}", v.len())));
                }
                parse_vec(v, "lms.a_true")?
            }
            None => default_system(n, self.seed()),
        };
        let model = SignalModel::for_system(r, &a_true, noise, self.seed()).map_err(|e| bad("lms", e))?;
        let schedule = match l.schedule.unwrap_or(ScheduleKind::Constant) {
            ScheduleKind::Constant => StepSchedule::Constant(step),
            ScheduleKind::Decay => StepSchedule::Decay(step),
        };
        Ok(LmsSettings {
            model,
            a_true,
            steps,
            schedule,
        })
    }

    /// The least-squares problem and whether every model component is holomorphic.
    pub fn custom_problem(&self) -> CResult<(crate::lsq::LsqProblem, bool)> {
        let c = self
            .custom
            .as_ref()
            .ok_or_else(|| bad("custom", "section is required for problem custom-polynomial"))?;
        if c.n == 0 || c.n > MAX_DIM {
            return Err(bad("custom.n", format!("must be in 1..={MAX_DIM}")));
        }
        if c.components.is_empty() || c.components.len() > MAX_DIM {
            return Err(bad("custom.components", format!("need 1..={MAX_DIM} components")));
        }
        let mut comps = Vec::new();
        for (i, comp) in c.components.iter().enumerate() {
            let mut terms = Vec::new();
            for (t, term) in comp.terms.iter().enumerate() {
                let field = format!("custom.components[{i}].terms[{t}]");
                let pad = |v: &[u32], what: &str| -> CResult<Vec<u32>> {
                    if v.len() > c.n {
                        return Err(bad(&format!("{field}.{what}"), format!("has more than n = {} exponents", c.n)));
                    }
                    let mut out = v.to_vec();
                    out.resize(c.n, 0);
                    Ok(out)
                };
                terms.push(Term {
                    coef: term.coef.parse(&format!("{field}.coef"))?,
                    z_pow: pad(&term.z, "z")?,
                    zbar_pow: pad(&term.zbar, "zbar")?,
                });
            }
            comps.push(ComplexPoly::new(c.n, terms).map_err(|e| bad(&format!("custom.components[{i}]"), e))?);
        }
        let m = comps.len();
        if c.data.len() != m {
            return Err(bad("custom.data", format!("expected {m} entries (one per component), got {}", c.data.len())));
        }
        let y = parse_vec(&c.data, "custom.data")?;
        let w = match &c.weight {
            None => None,
            Some(rows) => Some(parse_matrix(rows, m, "custom.weight")?),
        };
        let holomorphic = comps.iter().all(|p| p.is_holomorphic());
        let lsq = crate::problems::custom_polynomial_lsq(c.n, comps, y, w).map_err(|e| bad("custom", e))?;
        Ok((lsq, holomorphic))
    }
}

#[derive(Debug, Clone)]
pub struct LmsSettings {
    pub model: SignalModel,
    pub a_true: CVector,
    pub steps: usize,
    pub schedule: StepSchedule,
}

/// Seed-determined unknown system used when `lms.a_true` is not given.
pub fn default_system(n: usize, seed: u64) -> CVector {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a5a5);
    CVector::from_fn(n, |_, _| crate::lms::circular_gaussian(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_complex_literals() {
        assert_eq!(parse_complex("1+0j").unwrap(), C64::new(1.0, 0.0));
        assert_eq!(parse_complex("-j").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("1 + 2j").unwrap(), C64::new(1.0, 2.0));
        assert_eq!(parse_complex("1e-3-2j").unwrap(), C64::new(1e-3, -2.0));
        assert!(parse_complex("one").is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = RunConfig::from_toml("problem = \"example1\"\nbogus = 1\n").unwrap_err();
        assert!(err.0.contains("bogus"), "{err}");
        let err = RunConfig::from_toml("[optimizer]\nstepp = 1.0\n").unwrap_err();
        assert!(err.0.contains("stepp"), "{err}");
    }

    #[test]
    fn full_example_parses() {
        let text = r#"
problem = "custom-polynomial"
algorithm = "gauss_newton"
seed = 3

[optimizer]
step = 1.0
max_iters = 50
backtracking = "armijo"
z0 = ["0.5+0.5j"]

[custom]
n = 1
data = ["1+1j", 2]
[[custom.components]]
terms = [{ coef = "1", z = [2] }]
[[custom.components]]
terms = [{ coef = "0.5j", zbar = [1] }, { coef = 1.0 }]

[output]
trace = "out.csv"
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.problem(), ProblemKind::CustomPolynomial);
        assert_eq!(cfg.algorithm().unwrap(), QKind::GaussNewton);
        let (prob, holo) = cfg.custom_problem().unwrap();
        assert_eq!(prob.m(), 2);
        assert!(!holo);
        assert!(matches!(cfg.optimizer_config().unwrap().backtracking, Backtracking::Armijo { .. }));
    }

    #[test]
    fn range_errors_name_the_field() {
        let cfg = RunConfig::from_toml("[optimizer]\nstep = -1.0\n").unwrap();
        assert!(cfg.optimizer_config().unwrap_err().0.starts_with("optimizer"));
        let cfg = RunConfig::from_toml("[example]\nalpha = \"x\"\n").unwrap();
        assert!(cfg.example_problem().unwrap_err().0.starts_with("example.alpha"));
        let cfg = RunConfig::from_toml("[lms]\nn = 0\n").unwrap();
        assert!(cfg.lms_settings().unwrap_err().0.starts_with("lms.n"));
    }
}
