use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum F2Error {
    #[error("dimension mismatch: expected length {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("matrix parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("invalid chain complex: {0}")]
    Invalid(String),
    #[error("grade {grade} out of range 0..={top}")]
    GradeOutOfRange { grade: usize, top: usize },
    #[error("distance search needs {needed} candidates, above the budget of {budget}")]
    Resource { needed: u128, budget: u128 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("repetition length must be at least 2, got {0}")]
    SideLength(usize),
    #[error("unsupported surface code dimension {0}")]
    Dimension(usize),
    #[error("qubit grade {grade} unsupported: {reason}")]
    Grade { grade: usize, reason: String },
    #[error("no metachecks on the {0} side")]
    NoMetachecks(&'static str),
    #[error("code has no logical qubits")]
    NoLogicals,
    #[error("no logical representative found up to weight {0}")]
    CapExceeded(usize),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("schedule does not match code: {0}")]
    Schedule(String),
    #[error("circuit parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Code(#[from] CodeError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("fault site {0} does not exist")]
    InvalidSite(usize),
    #[error("pauli touches qubit {0} outside the fault site")]
    PauliSupport(usize),
    #[error("shots must be at least 1")]
    NoShots,
    #[error("noise config: {0}")]
    Config(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemError {
    #[error("fault probability {0} is not below 1/2")]
    Probability(f64),
    #[error("empty window")]
    EmptyWindow,
    #[error("window [{offset}, {end}) exceeds the {layers} detector layers")]
    WindowRange {
        offset: usize,
        end: usize,
        layers: usize,
    },
    #[error("dem parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("syndrome length {found} differs from detector count {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("syndrome not in the column space of the check matrix")]
    Inconsistent,
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    F2(#[from] F2Error),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Dem(#[from] DemError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
