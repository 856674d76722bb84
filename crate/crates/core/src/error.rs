use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CrError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("vector is not in the conjugate-coordinate space (residual {residual:.3e} > {tol:.1e})")]
    InadmissibleVector { residual: f64, tol: f64 },

    #[error("singular matrix: {which}")]
    SingularMatrix { which: String },

    #[error("non-finite value in {context}")]
    NonFiniteEvaluation { context: String },

    #[error("conjugation identity violated for a real-valued field: |dzbar - conj(dz)| = {residual:.3e} > {tol:.1e}")]
    ConjugationMismatch { residual: f64, tol: f64 },

    #[error("Hessian symmetry violated before symmetrization: residual {residual:.3e} > {tol:.1e}")]
    SymmetryViolation { residual: f64, tol: f64 },

    #[error("Hessian relation violated: {relation} residual {residual:.3e} > {tol:.1e}")]
    RelationViolation {
        relation: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("singular Q-defining matrix ({factor}){}", iteration_suffix(*.iteration))]
    SingularQ {
        factor: String,
        iteration: Option<usize>,
    },

    #[error("Q-defining matrix is not admissible (residual {residual:.3e})")]
    InadmissibleQ { residual: f64 },

    #[error("strategy {strategy} requires a least-squares problem")]
    UnsupportedStrategy { strategy: &'static str },

    #[error("diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("model is unidentifiable: ||alpha|^2 - |beta|^2| = {gap:.3e} (loss of identifiability)")]
    Unidentifiable { gap: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn iteration_suffix(it: Option<usize>) -> String {
    match it {
        Some(k) => format!(" at iteration {k}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, CrError>;
