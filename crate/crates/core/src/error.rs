use thiserror::Error;

/// Errors raised by the library. CLI exit codes are derived from the variant.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("weight evaluated on the singular set |y| = 0")]
    SingularEvaluation,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("ellipticity violated at {point:?}: eigenvalues in [{min}, {max}]")]
    Ellipticity { point: Vec<f64>, min: f64, max: f64 },

    #[error("conflicting Dirichlet constraints at node {node}: {first} vs {second}")]
    ConflictingConstraint { node: usize, first: f64, second: f64 },

    #[error("case `{case}` not valid here: {reason}")]
    CaseValidity { case: String, reason: String },

    #[error("conjugate gradient hit non-positive curvature {curvature:e} at iteration {iteration}")]
    NegativeCurvature { iteration: usize, curvature: f64 },

    #[error("conjugate gradient did not converge in {iterations} iterations (last residual {:e})", .history.last().copied().unwrap_or(f64::NAN))]
    NotConverged { iterations: usize, history: Vec<f64> },

    #[error("not admissible: {0}")]
    NotAdmissible(String),

    #[error("too few scales for a rate fit: {found} < {required}")]
    TooFewScales { found: usize, required: usize },

    #[error("point {0:?} is outside the sampled grid")]
    OutOfRange(Vec<f64>),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            LabError::NegativeCurvature { .. } | LabError::NotConverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
