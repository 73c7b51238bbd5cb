use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("wall flag mismatch between start and end configurations")]
    WallMismatch,

    #[error("negative step count {0}")]
    NegativeSteps(i64),

    #[error("point is not in the {0} chamber")]
    NotInChamber(&'static str),

    #[error("time argument out of range: {0}")]
    TimeOrder(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not {0}")]
    NotStructured(&'static str),

    #[error("acceptance rate {rate:.3e} below floor {floor:.1e} after {proposed} proposals; reduce L or N")]
    AcceptanceFloor { rate: f64, floor: f64, proposed: u64 },

    #[error("step halving budget exhausted at t = {t}")]
    HalvingExhausted { t: f64 },

    #[error("point within {distance:.3e} of the chamber boundary; finite-difference step {step:.3e} too coarse")]
    NearBoundary { distance: f64, step: f64 },

    #[error("rejection envelope violated (weight {0})")]
    EnvelopeViolated(f64),

    #[error("empty sample")]
    Empty,

    #[error("unknown suite '{0}'")]
    UnknownSuite(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
