use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read case file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed case file: {0}")]
    Parse(String),
    #[error("invalid case: {0}")]
    Validation(String),
    #[error("cannot scale case: {0}")]
    Scale(String),
}

#[derive(Debug, Error)]
pub enum LinearizeError {
    #[error("reduced susceptance matrix is singular: buses {buses:?} are disconnected from the slack bus")]
    Disconnected { buses: Vec<usize> },
    #[error("reduced susceptance matrix is singular")]
    Singular,
    #[error("case has no slack bus")]
    NoSlack,
}

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("bitstring length {found} does not match {expected} qubits")]
    LengthMismatch { expected: usize, found: usize },
    #[error("at least one renewable scenario is required")]
    NoScenarios,
    #[error("bits per variable must be at least 1")]
    ZeroBits,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("{requested} qubits exceeds the simulator cap of {cap}")]
    TooManyQubits { requested: usize, cap: usize },
    #[error("parameter vector has length {found}, ansatz expects {expected}")]
    ParamLength { expected: usize, found: usize },
    #[error("dimension mismatch: state has {state} qubits, operator has {operator}")]
    Dimension { state: usize, operator: usize },
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("entangler edge ({0}, {1}) is invalid")]
    BadEdge(usize, usize),
}

#[derive(Debug, Error)]
pub enum OptError {
    #[error("projection did not converge after {sweeps} sweeps (max residual {residual:e})")]
    ProjectionDiverged { sweeps: usize, residual: f64 },
    #[error("feasible set is empty: {0}")]
    EmptyFeasibleSet(String),
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Opt(#[from] OptError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
