use thiserror::Error;

/// Every failure the library reports. `code()` gives the stable kebab-case
/// identifier used in JSON reports and CLI messages.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("simplex is degenerate (volume {volume:e})")]
    DegenerateSimplex { volume: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("region is empty")]
    EmptyRegion,
    #[error("invalid triangulation: {0}")]
    BadTriangulation(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("map `{0}` is not injective on its region closure")]
    NotInjective(String),
    #[error("family is not expanding (sigma1 = {sigma1})")]
    NotExpanding { sigma1: f64 },
    #[error("word has length {0}, need at least 3")]
    WordTooShort(usize),
    #[error("start point lies on the partition skeleton")]
    BoundaryStart,
    #[error("orbit hit the partition skeleton at step {step}")]
    BoundaryHit { step: usize },
    #[error("cylinder is not hyperbolic")]
    NotHyperbolic,
    #[error("bad constants: {0}")]
    BadConstants(String),
    #[error("point is outside the cylinder closure")]
    OutsideCylinder,
    #[error("set has zero sampled measure")]
    DegenerateSet,
    #[error("n = {0} is not a hyperbolic time")]
    NotHyperbolicTime(usize),
    #[error("box with zero volume")]
    DegenerateBoxes,
    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("invalid scene: {0}")]
    Scene(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::DegenerateSimplex { .. } => "degenerate-simplex",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::EmptyRegion => "empty-region",
            Error::BadTriangulation(_) => "bad-triangulation",
            Error::BadParameter(_) => "bad-parameter",
            Error::NotInjective(_) => "not-injective",
            Error::NotExpanding { .. } => "not-expanding",
            Error::WordTooShort(_) => "word-too-short",
            Error::BoundaryStart => "boundary-start",
            Error::BoundaryHit { .. } => "boundary-hit",
            Error::NotHyperbolic => "not-hyperbolic",
            Error::BadConstants(_) => "bad-constants",
            Error::OutsideCylinder => "outside-cylinder",
            Error::DegenerateSet => "degenerate-set",
            Error::NotHyperbolicTime(_) => "not-hyperbolic-time",
            Error::DegenerateBoxes => "degenerate-boxes",
            Error::SymbolOutOfRange { .. } => "symbol-out-of-range",
            Error::Scene(_) => "bad-scene",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
