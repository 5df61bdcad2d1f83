use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("back-reference at output position {position} with distance {distance} reaches outside the block")]
    MalformedBackRef { position: usize, distance: usize },

    #[error("lane {0} is outside the warp")]
    InvalidLane(usize),

    #[error("prefix sum overflowed the lane accumulator")]
    Overflow,

    #[error("{symbols} symbols cannot be coded with codewords of at most {cwl_max} bits")]
    TooManySymbols { symbols: usize, cwl_max: u8 },

    #[error("no symbol has a non-zero frequency")]
    EmptyAlphabet,

    #[error("corrupt stream: {0}")]
    CorruptStream(&'static str),

    #[error("multi-round resolution made no progress in round {round}")]
    NoProgress { round: u32 },

    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("truncated input while reading {0}")]
    Truncated(&'static str),

    #[error("inconsistent header field `{0}`")]
    HeaderInconsistent(&'static str),

    #[error("checksum mismatch: header {expected:#010x}, data {actual:#010x}")]
    ChecksumMismatch { expected: u32, actual: u32 },

    #[error("nesting depth {0} must divide 32")]
    InvalidDepth(u32),

    #[error("could not generate a stream with the requested structure after {attempts} attempts")]
    GenerationFailed { attempts: u32 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("block {index}: {source}")]
    Block {
        index: u32,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True when the error describes damaged or non-conforming input rather
    /// than an environment failure or a caller mistake.
    pub fn is_corrupt_input(&self) -> bool {
        match self {
            Error::Block { source, .. } => source.is_corrupt_input(),
            Error::Io(_) | Error::InvalidParams(_) | Error::InvalidDepth(_) | Error::GenerationFailed { .. } => false,
            _ => true,
        }
    }

    pub(crate) fn in_block(self, index: u32) -> Error {
        match self {
            e @ Error::Block { .. } => e,
            e => Error::Block {
                index,
                source: Box::new(e),
            },
        }
    }

    /// Strips block context, returning the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Block { source, .. } => source.root(),
            e => e,
        }
    }
}
