use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ChannelError;
use crate::attacks::ops;
use crate::imagecore::{quantize, ImageBuffer, ImageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Mild,
    Standard,
    Harsh,
}

/// One rung of the degradation stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradeParams {
    pub scale: f64,
    pub noise_sigma: f64,
    pub jpeg_quality: u8,
    /// Half-width of the uniform per-channel gain jitter.
    pub color_jitter: f64,
}

impl Severity {
    pub fn params(&self) -> DegradeParams {
        match self {
            Self::Mild => DegradeParams { scale: 0.75, noise_sigma: 2.0, jpeg_quality: 90, color_jitter: 0.01 },
            Self::Standard => DegradeParams { scale: 0.5, noise_sigma: 10.0, jpeg_quality: 75, color_jitter: 0.02 },
            Self::Harsh => DegradeParams { scale: 0.35, noise_sigma: 20.0, jpeg_quality: 30, color_jitter: 0.04 },
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mild => "mild",
            Self::Standard => "standard",
            Self::Harsh => "harsh",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mild" => Ok(Self::Mild),
            "standard" => Ok(Self::Standard),
            "harsh" => Ok(Self::Harsh),
            other => Err(ChannelError::InvalidParameter(format!("unknown severity '{other}'"))),
        }
    }
}

/// Seeded stand-in for "generated by a model fine-tuned on watermarked art":
/// down/up resampling, additive Gaussian noise, JPEG recompression and a slight
/// per-channel gain jitter.
pub fn surrogate_degrade(img: &ImageBuffer, severity: Severity, seed: u64) -> Result<ImageBuffer, ImageError> {
    degrade_with(img, &severity.params(), seed)
}

pub fn degrade_with(img: &ImageBuffer, p: &DegradeParams, seed: u64) -> Result<ImageBuffer, ImageError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let resampled = ops::resize_round_trip(img, p.scale);
    let gains: Vec<f64> = (0..img.channels()).map(|_| 1.0 + rng.random_range(-1.0..=1.0) * p.color_jitter).collect();
    let noise = Normal::new(0.0, p.noise_sigma).expect("finite sigma");
    let ch = img.channels();
    let data = resampled
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| quantize(f64::from(v) * gains[i % ch] + noise.sample(&mut rng)))
        .collect();
    let noisy = ImageBuffer::new(img.width(), img.height(), ch, data)?;
    ops::jpeg(&noisy, p.jpeg_quality)
}
