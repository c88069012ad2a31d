use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Esn2Error {
    #[error("non-finite input {0}")]
    NonFiniteInput(f64),

    #[error("unsupported zeta order {0}; only 0, 1 and 2 are available")]
    UnsupportedZetaOrder(u8),

    #[error("parameter {name} is not finite")]
    NonFiniteParameter { name: &'static str },

    #[error("scale matrix is not positive definite (Omega11={omega11}, Omega12={omega12}, Omega22={omega22})")]
    NonPositiveDefiniteScale { omega11: f64, omega12: f64, omega22: f64 },

    #[error("invalid scale {0}; must be positive")]
    InvalidScale(f64),

    #[error("correlation {0} outside (-1, 1)")]
    CorrelationOutOfRange(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset columns have different lengths ({0} and {1})")]
    RaggedDataset(usize, usize),

    #[error("dataset entry {index} is not finite")]
    NonFiniteData { index: usize },

    #[error("dataset has {got} observations, at least {need} are required")]
    DatasetTooSmall { got: usize, need: usize },

    #[error("integrand is not finite at ({x}, {y})")]
    NonFiniteIntegrand { x: f64, y: f64 },

    #[error("invalid integration box: lower ({lower:?}) must be below upper ({upper:?})")]
    InvalidBox { lower: [f64; 2], upper: [f64; 2] },

    #[error("invalid controls: {0}")]
    InvalidControls(String),

    #[error("reparameterization derivative is zero")]
    ZeroDerivative,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("finite-difference probe failed along coordinate {coordinate}")]
    ProbeFailed { coordinate: usize },

    #[error("acceptance probability Phi(tau) = {0:e} is below 1e-6; rejection sampling is impractical")]
    PathologicalAcceptance(f64),
}

pub type Result<T> = std::result::Result<T, Esn2Error>;
