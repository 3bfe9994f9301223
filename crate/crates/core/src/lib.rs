//! Empirical tools for studying normal numbers.
//!
//! Digit streams of concrete numbers ([`sources`]), exact expansions of
//! rationals ([`exact`]), finite-prefix n-gram estimators ([`ngram`]) and the
//! swap-difference Δ-scheme with its pseudonormality test ([`delta`]).

pub mod delta;
pub mod digits;
pub mod error;
pub mod exact;
pub mod ngram;
pub mod sources;

pub use digits::{Base, DigitSource, Expansion};
pub use error::{Error, Result};
