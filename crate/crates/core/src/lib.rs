//! Evaluation toolkit for color reference games.
//!
//! A speaker sees three color swatches, one of which is the target, and
//! produces an utterance; a listener must pick the target from the utterance
//! alone. This crate scores candidate utterances two ways and lets the two
//! families be compared head to head:
//!
//! - **Communication-based scores** ([`commeval`]): a listener model maps the
//!   utterance to a distribution over the three context colors, and the
//!   utterance is scored by the probability it places on the true target
//!   (equivalently `exp(-KL)` against the speaker's point-mass distribution).
//!   Listener models ([`listeners`]) include an analytic oracle backed by a
//!   color lexicon, a trainable literal listener (LSTM encoder scoring colors
//!   with a learned quadratic form), and a pragmatic listener obtained by
//!   Bayes-inverting a color-conditioned language model.
//! - **N-gram overlap scores** ([`metrics`]): BLEU, ROUGE-L, METEOR, and
//!   CIDEr computed against per-context reference descriptions.
//!
//! Supporting pieces: a synthetic corpus generator with graded candidate
//! quality ([`corpus`]), color conversions and CIEDE2000 ([`colorspace`]),
//! tokenization/stemming ([`textproc`]), and correlation statistics with
//! Williams' test and KDE export ([`stats`]).
//!
//! All randomized paths are deterministic given a seed, and all file formats
//! serialize canonically so identical inputs produce identical bytes.

use std::path::PathBuf;

pub mod colorspace;
pub mod commeval;
pub mod corpus;
pub mod jsonfmt;
pub mod listeners;
pub mod metrics;
pub mod scalar;
pub mod stats;
pub mod textproc;

pub use scalar::Scalar;

/// Scalar type used by the concrete data model (corpora, models, score tables).
/// Math kernels are generic over [`Scalar`] and work with `f32` as well.
pub type Real = f64;

/// Crate-wide error type. The CLI maps [`Error::Usage`] to exit code 2 and
/// everything else to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// I/O failure, tagged with the path involved.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A file that did not parse; `line` is 1-based (0 for whole-file problems).
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    /// Structurally valid input that violates a data invariant.
    #[error("{0}")]
    Invalid(String),
    /// An API precondition violation (bad arguments rather than bad data).
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
