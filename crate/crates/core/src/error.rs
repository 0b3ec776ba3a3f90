//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operand length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },

    #[error("bit string of length {len} is not a whole number of bytes")]
    Padding { len: usize },

    #[error("invalid character {found:?} at bit offset {offset}")]
    InvalidBitChar { offset: usize, found: char },

    #[error("security parameter must be at least {min}, got {lambda}")]
    InvalidLambda { lambda: u32, min: u32 },

    #[error("insufficient entropy: need {needed} bits, got {got}")]
    InsufficientEntropy { needed: usize, got: usize },

    #[error("watermark signal must be 0 or 1 when embedding")]
    BottomSignal,

    #[error("invalid probability {value} for {what}")]
    InvalidProbability { what: &'static str, value: f64 },

    #[error("source halted after {context_len} context bits")]
    SourceHalted { context_len: usize },

    #[error(
        "entropy exhausted at block offset {offset}: {len} bits, score {score:.4}, bound {pvalue:.3e}"
    )]
    EntropyExhausted {
        /// Payload offset of the block that failed to close.
        offset: usize,
        len: usize,
        score: f64,
        pvalue: f64,
    },

    #[error("block at payload offset {offset} closed with the opposite signal")]
    SignalInverted { offset: usize },

    #[error("no token extends the bit prefix {prefix}")]
    ImpossiblePrefix { prefix: String },

    #[error("bits at offset {offset} do not decode to a token in the vocabulary")]
    UnknownToken { offset: usize },

    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),

    #[error("hash length {lambda} exceeds the 256-bit digest")]
    UnsupportedHashLength { lambda: u32 },

    #[error("detections overlap or are out of order at index {index}")]
    OverlappingDetections { index: usize },

    #[error("detection at index {index} lies outside the {payload_len}-bit payload")]
    DetectionOutOfRange { index: usize, payload_len: usize },

    #[error("invalid attack: {0}")]
    InvalidAttack(String),

    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
