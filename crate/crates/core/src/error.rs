use thiserror::Error;

use crate::entangle::PairId;

/// Errors raised by the simulator, the protocol layer and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QentError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("position {pos} out of range for register of length {len}")]
    OutOfRange { pos: usize, len: usize },

    #[error("qubit at position {0} is lost")]
    QubitLost(usize),

    /// Measuring a lost qubit has no defined outcome; callers pick a policy.
    #[error("qubit at position {0} is lost: measurement has no defined outcome")]
    NoDefinedOutcome(usize),

    #[error("amplitude matrix is factorable: not entangled")]
    NotEntangled,

    #[error("stale entanglement for pair {0}")]
    StaleEntanglement(PairId),

    #[error("unknown pair {0}")]
    UnknownPair(PairId),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("unrepresentable entangling operation: {0}")]
    UnrepresentableEntanglingOperation(String),

    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },

    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u32),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("peer error {code}: {message}")]
    Peer { code: String, message: String },
}

pub type Result<T> = std::result::Result<T, QentError>;

impl QentError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        QentError::Validation(msg.into())
    }

    /// Machine-readable code used in ERROR envelopes and by the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            QentError::Validation(_) => "validation",
            QentError::OutOfRange { .. } => "out_of_range",
            QentError::QubitLost(_) => "qubit_lost",
            QentError::NoDefinedOutcome(_) => "no_defined_outcome",
            QentError::NotEntangled => "not_entangled",
            QentError::StaleEntanglement(_) => "stale_entanglement",
            QentError::UnknownPair(_) => "unknown_pair",
            QentError::ProtocolViolation(_) => "protocol_violation",
            QentError::UnrepresentableEntanglingOperation(_) => "unrepresentable_operation",
            QentError::Decode { .. } => "decode",
            QentError::UnsupportedVersion(_) => "unsupported_version",
            QentError::Framing(_) => "framing",
            QentError::Transport(_) => "transport",
            QentError::Peer { .. } => "peer",
        }
    }
}

impl From<std::io::Error> for QentError {
    fn from(e: std::io::Error) -> Self {
        QentError::Transport(e.to_string())
    }
}
