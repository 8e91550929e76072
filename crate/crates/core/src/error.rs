use thiserror::Error;

use crate::model::Violation;

/// Failures while reading a configuration file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}` (line {line}): {message}")]
    Field {
        field: String,
        line: usize,
        message: String,
    },
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("dimension mismatch between `{first}` and `{second}`: {detail}")]
    DimensionMismatch {
        first: String,
        second: String,
        detail: String,
    },
    #[error("invalid specification: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    /// `R^a_n - B^a' L_{n+1} B^a` is not positive definite: the attacker's
    /// stage maximization is unbounded.
    #[error("concavity violated at stage {stage}: R^a - B^a'LB^a has min eigenvalue {min_eigenvalue:e}")]
    ConcavityViolation { stage: usize, min_eigenvalue: f64 },
    #[error("stage {stage}: block `{block}` of M is singular (min |eigenvalue| {min_abs_eigenvalue:e})")]
    SingularStage {
        stage: usize,
        block: &'static str,
        min_abs_eigenvalue: f64,
    },
    #[error("stage {stage} out of range for horizon {horizon}")]
    StageOutOfRange { stage: usize, horizon: usize },
}

impl ControlError {
    pub fn stage(&self) -> usize {
        match *self {
            ControlError::ConcavityViolation { stage, .. }
            | ControlError::SingularStage { stage, .. }
            | ControlError::StageOutOfRange { stage, .. } => stage,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("innovation covariance D Z D' + E Σo E' is singular (min eigenvalue {min_eigenvalue:e})")]
    SingularInnovation { min_eigenvalue: f64 },
    #[error("the initial state is known exactly; an observation at stage 0 is not allowed")]
    InvalidInitialObservation,
    #[error("observation {} but h = {h}", if *.present { "present" } else { "absent" })]
    ObservationMismatch { present: bool, h: bool },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("no pure-strategy Nash equilibrium at stage {stage}{}", node_suffix(.node))]
    NoPureNash { stage: usize, node: Option<usize> },
    #[error("initial policy contains (i_d, i_a) = (0, 1) at stage {stage}")]
    InvalidInitialPolicy { stage: usize },
    #[error("decision sequence has length {got}, horizon is {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("covariance tree would need up to {required} nodes (limit {limit})")]
    TreeTooLarge { required: u128, limit: usize },
    #[error("no strategy node for outcome history {history}")]
    MissingNode { history: String },
}

fn node_suffix(node: &Option<usize>) -> String {
    match node {
        Some(id) => format!(" (node {id})"),
        None => String::new(),
    }
}

/// Crate-wide error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
