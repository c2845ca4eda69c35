use thiserror::Error;

pub type Result<T> = std::result::Result<T, MtmError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MtmError {
    #[error("EmptySet: no traces")]
    EmptySet,
    #[error("TraceTooShort: trace {trace} has fewer than two points")]
    TraceTooShort { trace: usize },
    #[error("UnknownPoint: trace {trace} refers to point {point}")]
    UnknownPoint { trace: usize, point: usize },
    #[error("NotEndless: point {point}")]
    NotEndless { point: String },
    #[error("DuplicateTrace: trace {trace}")]
    DuplicateTrace { trace: usize },
    #[error("InvalidRule: {0}")]
    InvalidRule(String),
    #[error("InvalidStochasticMatrix: {0}")]
    InvalidStochasticMatrix(String),
    #[error("SolveFailed: residual {residual:e}")]
    SolveFailed { residual: f64 },
    #[error("NotStationaryInput")]
    NotStationaryInput,
    #[error("ZeroSpatialMass: point {point}")]
    ZeroSpatialMass { point: usize },
    #[error("OverlappingBundles")]
    OverlappingBundles,
    #[error("InvalidBundle: {0}")]
    InvalidBundle(String),
    #[error("EmptyRoute: route {route}")]
    EmptyRoute { route: usize },
    #[error("EndpointMismatch: route {route}")]
    EndpointMismatch { route: usize },
    #[error("NotBalanced")]
    NotBalanced,
    #[error("NotStronglyConnected")]
    NotStronglyConnected,
    #[error("ExpansionTooLarge: more than {cap} traces")]
    ExpansionTooLarge { cap: usize },
    #[error("UnrepresentableSlowness: {0}")]
    UnrepresentableSlowness(String),
    #[error("DegenerateConditioning")]
    DegenerateConditioning,
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("UnsupportedCoordinates: {0}")]
    UnsupportedCoordinates(String),
    #[error("BoundaryCellNotCovered: {0}")]
    BoundaryCellNotCovered(String),
    #[error("MismatchedSupport")]
    MismatchedSupport,
    #[error("Parse: {0}")]
    Parse(String),
    #[error("Io: {0}")]
    Io(String),
}

impl From<std::io::Error> for MtmError {
    fn from(e: std::io::Error) -> Self {
        MtmError::Io(e.to_string())
    }
}
