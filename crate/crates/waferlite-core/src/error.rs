//! Error type shared by all core modules.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Tensor shapes incompatible with the requested operation.
    Dim(String),
    /// Invalid hyperparameter / resolution / architecture combination.
    Config(String),
    /// Class label out of range.
    Label { row: usize, label: usize, classes: usize },
    /// Operation used in the wrong state (e.g. backward without forward).
    State(String),
    /// A class cannot be split across the requested parts.
    Split { class: String, have: usize, parts: usize },
    /// Statistics requested over an empty collection.
    Stats(String),
    /// Defect composition failed (e.g. zero-mass mask).
    Composition(String),
    /// Invalid oversampling specification.
    Spec(String),
    /// Training diverged or was misconfigured.
    Training { epoch: usize, batch: usize, msg: String },
    /// Optimizer step rejected (non-finite gradient).
    Optim(String),
    /// Text value could not be parsed (labels, config values).
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dim(m) => write!(f, "dimension error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Label { row, label, classes } => {
                write!(f, "label error: row {row} has label {label}, expected 0..{classes}")
            }
            Error::State(m) => write!(f, "state error: {m}"),
            Error::Split { class, have, parts } => {
                write!(f, "split error: class '{class}' has {have} samples, fewer than {parts} parts")
            }
            Error::Stats(m) => write!(f, "stats error: {m}"),
            Error::Composition(m) => write!(f, "composition error: {m}"),
            Error::Spec(m) => write!(f, "spec error: {m}"),
            Error::Training { epoch, batch, msg } => {
                write!(f, "training error at epoch {epoch}, batch {batch}: {msg}")
            }
            Error::Optim(m) => write!(f, "optimizer error: {m}"),
            Error::Parse(m) => write!(f, "parse error: {m}"),
        }
    }
}

impl core::error::Error for Error {}
