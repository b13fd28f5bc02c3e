use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Error type shared by every module in the core crate.
#[derive(Debug, Clone, PartialEq)]
pub enum MilError {
    /// Operand shapes are incompatible for the attempted operation.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// A tensor invariant was violated (length vs shape, non-scalar loss, ...).
    InvalidTensor(String),
    /// A NaN or infinity appeared where only finite values are allowed.
    NonFinite { op: &'static str },
    /// Malformed IDX payload.
    Format(String),
    /// Bag sampling could not satisfy its constraints.
    Sampling(String),
    /// A metric is undefined for the given inputs (e.g. single-class AUC).
    UndefinedMetric(String),
    /// Training aborted (non-finite loss, missing split, ...).
    Training(String),
    /// Invalid configuration of a layer, rule or protocol.
    Config(String),
}

impl fmt::Display for MilError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MilError::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: incompatible shapes {lhs:?} and {rhs:?}")
            }
            MilError::InvalidTensor(msg) => write!(f, "invalid tensor: {msg}"),
            MilError::NonFinite { op } => write!(f, "{op}: non-finite value produced"),
            MilError::Format(msg) => write!(f, "format error: {msg}"),
            MilError::Sampling(msg) => write!(f, "sampling error: {msg}"),
            MilError::UndefinedMetric(msg) => write!(f, "undefined metric: {msg}"),
            MilError::Training(msg) => write!(f, "training error: {msg}"),
            MilError::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl core::error::Error for MilError {}

pub type Result<T> = core::result::Result<T, MilError>;
