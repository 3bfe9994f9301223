use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("base {0} is outside the supported range 2..=36")]
    InvalidBase(u32),

    #[error("digit {digit} is not valid in base {base}")]
    InvalidDigit { digit: u8, base: u8 },

    #[error("a periodic expansion needs a non-empty period")]
    EmptyPeriod,

    /// A finite source ended after this many digits, short of the request.
    #[error("digit source exhausted after {0} digits")]
    Exhausted(u64),

    #[error("bad digit {ch:?} at digit position {position}")]
    BadDigit { position: u64, ch: char },

    #[error("file declares base {header} but base {requested} was requested")]
    BaseMismatch { header: u32, requested: u8 },

    #[error("malformed digit file header: {0:?}")]
    BadHeader(String),

    #[error("Martin's product is only computed for 1..=4 factors, got {0}")]
    TermCap(u32),

    /// The swap difference is identically zero: the row is omitted.
    #[error("swap difference for digits ({i}, {j}) is identically zero")]
    ZeroDelta { i: u8, j: u8 },

    #[error("n-gram statistics need at least one window (m = {m}, n = {n})")]
    DegenerateWindow { m: usize, n: usize },

    #[error("{base}^{n} distinct strings do not fit the n-gram index")]
    NGramTooLong { base: u8, n: usize },

    #[error("cannot test an empty Δ-scheme")]
    EmptyScheme,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
