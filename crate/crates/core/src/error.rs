use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("no binding for `{0}`")]
    MissingBinding(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("quadrature failed to converge on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64 },
    #[error("singular integrand at theta = {theta}: denominator {denominator}")]
    SingularIntegrand { theta: f64, denominator: f64 },
    #[error("integration left the domain at {coords:?}")]
    LeftDomain { coords: Vec<f64> },
    #[error("step size collapsed at t = {t}")]
    StiffnessFailure { t: f64 },
    #[error("root not bracketed on [{a}, {b}]")]
    NotBracketed { a: f64, b: f64 },
    #[error("matter content differs: {left} vs {right}")]
    SignatureMismatch { left: String, right: String },
    #[error("no common temperature reachable along the adiabats ({lo} > {hi})")]
    UnreachableTemperature { lo: f64, hi: f64 },
    #[error("reference states are not strictly ordered")]
    ReferenceNotStrict,
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("calibration family never crosses equivalence")]
    NoBracket,
    #[error("calibration graph is disconnected: {0:?} unreachable from the reference")]
    DisconnectedGraph(Vec<String>),
    #[error("inconsistent calibrators around cycle {cycle:?} (mismatch {mismatch:e})")]
    InconsistentQuads { cycle: Vec<String>, mismatch: f64 },
    #[error("infeasible constants: negative cycle {cycle:?} with total {total}")]
    Infeasible { cycle: Vec<String>, total: f64 },
    #[error("unknown state space `{0}`")]
    UnknownSpace(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    Io(String),
    #[error("json: {0}")]
    Json(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
