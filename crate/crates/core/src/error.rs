use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },
    #[error("inverse map failed")]
    InverseMapFailed,
    #[error("invalid interface geometry: {0}")]
    InvalidInterface(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("element inversion in poro element {element}")]
    ElementInversion { element: usize },
    #[error("porosity out of range: {0}")]
    PorosityOutOfRange(f64),
    #[error("porosity saturation: J*phi = {0}")]
    PorositySaturation(f64),
    #[error("substitution method undefined at no-slip limit")]
    SubstitutionNoSlip,
    #[error("reconstruction required for node {0}")]
    ReconstructionRequired(usize),
    #[error("singular system: zero pivot at dof {0}")]
    SingularSystem(usize),
    #[error("nonlinear divergence after {iterations} iterations (residual history {history:?})")]
    NonlinearDivergence { iterations: usize, history: Vec<f64> },
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
