//! Blind multi-bit codecs and bit-accuracy scoring.
//!
//! Both codecs work on the luma plane only; chroma passes through untouched.
//! Extraction needs the suspect image, the key and the [`CodecConfig`], never
//! the original.

mod config;
mod payload;
mod qim;
mod spread;
mod streams;

pub use config::{
    CodecConfig, Method, SecretKey, DEFAULT_PAYLOAD_LENGTH, DEFAULT_PN_GAIN, DEFAULT_QIM_STEP, DEFAULT_REDUNDANCY,
};
pub use payload::{bit_accuracy, BitAccuracy, PayloadRole, WatermarkPayload, SUPPORTED_LENGTHS};
pub use streams::{derive_streams, KeyStreams, MID_BAND_LEN};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{self, ImageBuffer, ImageError, PlanarF64, MIN_WATERMARK_DIM};
use crate::transforms::TransformError;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("image {width}x{height} is smaller than {min}x{min}", min = MIN_WATERMARK_DIM)]
    TooSmall { width: usize, height: usize },
    #[error("payload needs {needed} blocks but only {available} are available")]
    CapacityExceeded { needed: usize, available: usize },
    #[error("dwt-dct-svd embeds in the Y channel of a colour image; use dwt-dct for grayscale")]
    GrayscaleRequiresDwtDct,
    #[error("invalid codec config: {0}")]
    InvalidConfig(String),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("payload has {payload} bits but the config expects {config}")]
    PayloadLengthMismatch { payload: usize, config: usize },
    #[error("bit vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedStats {
    pub psnr: f64,
}

/// Decoded bits plus per-bit vote confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub bits: Vec<bool>,
    pub confidences: Vec<f64>,
    pub method: Method,
    pub payload_length: usize,
    /// Luma gain undone before decoding (1.0 when none was detected).
    pub luma_gain: f64,
}

struct LumaSplit {
    y: PlanarF64,
    chroma: Option<(PlanarF64, PlanarF64)>,
}

fn split_luma(img: &ImageBuffer) -> Result<LumaSplit, CodecError> {
    if img.is_rgb() {
        let (y, u, v) = imagecore::rgb_to_yuv(img)?;
        Ok(LumaSplit { y, chroma: Some((u, v)) })
    } else {
        Ok(LumaSplit { y: img.channel_plane(0), chroma: None })
    }
}

fn merge_luma(y: &PlanarF64, chroma: &Option<(PlanarF64, PlanarF64)>) -> Result<ImageBuffer, CodecError> {
    Ok(match chroma {
        Some((u, v)) => imagecore::yuv_to_rgb(y, u, v)?,
        None => y.to_gray()?,
    })
}

fn check_shape(img: &ImageBuffer, config: &CodecConfig) -> Result<(), CodecError> {
    config.validate()?;
    if img.width() < MIN_WATERMARK_DIM || img.height() < MIN_WATERMARK_DIM {
        return Err(CodecError::TooSmall { width: img.width(), height: img.height() });
    }
    let available = config.method.capacity_blocks(img.width(), img.height());
    if config.blocks_needed() > available {
        return Err(CodecError::CapacityExceeded { needed: config.blocks_needed(), available });
    }
    Ok(())
}

/// Embeds `payload` into `img`, returning the watermarked image and its PSNR.
pub fn embed(
    img: &ImageBuffer,
    payload: &WatermarkPayload,
    config: &CodecConfig,
) -> Result<(ImageBuffer, EmbedStats), CodecError> {
    if payload.len() != config.payload_length {
        return Err(CodecError::PayloadLengthMismatch { payload: payload.len(), config: config.payload_length });
    }
    if config.method == Method::DwtDctSvd && !img.is_rgb() {
        return Err(CodecError::GrayscaleRequiresDwtDct);
    }
    check_shape(img, config)?;
    let streams = derive_streams(&config.key, (img.width(), img.height()), config);
    let split = split_luma(img)?;
    let y = match config.method {
        Method::DwtDct => spread::embed_plane(&split.y, payload.bits(), config, &streams)?,
        Method::DwtDctSvd => qim::embed_plane(&split.y, payload.bits(), config, &streams)?,
    };
    let out = merge_luma(&y, &split.chroma)?;
    let psnr = imagecore::psnr(img, &out)?;
    Ok((out, EmbedStats { psnr }))
}

/// Blind extraction: only the suspect image and the config are needed.
pub fn extract(img: &ImageBuffer, config: &CodecConfig) -> Result<ExtractionResult, CodecError> {
    check_shape(img, config)?;
    let streams = derive_streams(&config.key, (img.width(), img.height()), config);
    let y = img.luma();
    let (votes, luma_gain) = match config.method {
        Method::DwtDct => (spread::extract_plane(&y, config, &streams)?, 1.0),
        Method::DwtDctSvd => qim::extract_plane(&y, config, &streams)?,
    };
    let (bits, confidences) = votes.into_iter().unzip();
    Ok(ExtractionResult { bits, confidences, method: config.method, payload_length: config.payload_length, luma_gain })
}

/// Majority vote over per-block decisions: `(bit, |ones - zeros| / k)`.
pub(crate) fn majority(decisions: &[bool]) -> (bool, f64) {
    let ones = decisions.iter().filter(|&&b| b).count();
    let zeros = decisions.len() - ones;
    (ones > zeros, ones.abs_diff(zeros) as f64 / decisions.len() as f64)
}
