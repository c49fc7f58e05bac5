//! Turning per-image extraction outcomes into evidence: histograms, summary
//! statistics, hypothesis tests against a null model, a theft verdict and
//! authorization matching.

mod authorization;
mod detect;
mod pipeline;

pub use authorization::{match_authorization, AuthorizationMatch, Ruling, DEFAULT_MATCH_THRESHOLD};
pub use detect::{
    detect, histogram, power_curve, summary, Binning, Decision, NullKind, NullModel, PowerPoint, Summary,
    VerificationVerdict, DEFAULT_ALPHA, DEFAULT_P0, DEFAULT_RHO, MIN_MEAN_TEST_SAMPLES, MIN_REFERENCE_SAMPLES,
    NORMAL_APPROX_SAMPLES,
};
pub use pipeline::{extract_accuracies, extract_and_detect, multi_artist_verify, ArtistRecord};

use thiserror::Error;

use crate::channel::ChannelError;
use crate::watermark::CodecError;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("too few samples: {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("null model is for {null} bits but samples have {samples}")]
    NullMismatch { samples: usize, null: usize },
    #[error("invalid null model: {0}")]
    InvalidNull(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("authorized and unauthorized payloads are identical")]
    IdenticalPayloads,
    #[error("length mismatch: extracted {extracted} bits, payloads {authorized} and {unauthorized}")]
    LengthMismatch { extracted: usize, authorized: usize, unauthorized: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}
