use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hermite degree {degree} exceeds the supported maximum {cap}")]
    HermiteDegree { degree: usize, cap: usize },

    #[error("catalog limit exceeded: {0}")]
    CatalogCap(String),

    #[error("chaos degree overflow: {0}")]
    DegreeOverflow(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{active} active increment slots exceed the quadrature cap of {cap}; enable Monte Carlo projection")]
    QuadratureCap { active: usize, cap: usize },

    #[error("singular implicit step at time index {step}")]
    SingularStep { step: usize },

    #[error("tau * Lipschitz = {product:.4} is not below 1/2; use at least N = {suggested} steps")]
    Contraction { product: f64, suggested: usize },

    #[error("Picard iteration did not converge at step {step} after {iterations} iterations (last update {residual:.3e})")]
    PicardDivergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("conjugate gradient stagnated with gradient norm {grad_norm:.3e} after {iterations} iterations")]
    CgStagnation { grad_norm: f64, iterations: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
