use std::io;

use thiserror::Error;

/// Errors raised by the solvers, protocols and instance I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("protocol needs at least 2 sensors, got {0}")]
    TooFewSensors(usize),

    #[error("cannot split {rows} rows across {sensors} sensors")]
    PartitionTooLarge { rows: usize, sensors: usize },

    #[error("unknown node id {id} in a network of {nodes} nodes")]
    UnknownNode { id: usize, nodes: usize },

    #[error("node {0} cannot send to itself")]
    SelfSend(usize),

    #[error("malformed instance file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
