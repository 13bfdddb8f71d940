use thiserror::Error;

use crate::solver::Assignment;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("node at position {position} has id {id}; ids must be dense 0..n-1")]
    NonDenseIds { position: usize, id: usize },
    #[error("unknown country {0}")]
    UnknownCountry(usize),
    #[error("arc references unknown node {0}")]
    UnknownNode(usize),
    #[error("self-arc on node {0}")]
    SelfArc(usize),
    #[error("duplicate arc {from} -> {to}")]
    DuplicateArc { from: usize, to: usize },
    #[error("arc {from} -> {to} has a negative or non-finite weight")]
    BadWeight { from: usize, to: usize },
    #[error("patient-donor pair {0} has no patient attributes")]
    MissingPatient(usize),
    #[error("altruistic donor {0} carries patient attributes")]
    AltruistWithPatient(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{what} frequencies sum to {sum}, expected 1")]
    FrequencySum { what: &'static str, sum: f64 },
    #[error("invalid value for {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("policy has {got} country entries but the graph has {expected} countries")]
    CountryCount { expected: usize, got: usize },
    #[error("could not draw an incompatible pair after {0} attempts")]
    RejectionLimit(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("cycle or segment references unknown node {0}")]
    UnknownNode(usize),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("time limit reached; best incumbent has objective {}", incumbent.objective)]
    TimedOut { incumbent: Box<Assignment> },
    #[error("model is infeasible")]
    Infeasible,
    #[error("model has {got} variables; exhaustive search supports at most {max}")]
    TooManyVariables { got: usize, max: usize },
    #[error("numerical failure in the LP relaxation: {0}")]
    Numerical(String),
    #[error("external solver failed: {0}")]
    External(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("selected arcs are not decomposable into cycles: {0}")]
    NotDecomposable(String),
    #[error("assignment has {got} values for a model with {expected} variables")]
    Length { expected: usize, got: usize },
}

/// Errors surfaced by the policy runners and simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KepError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}
