use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::AttackError;
use crate::watermark::{CodecConfig, Method, PayloadRole, SecretKey, WatermarkPayload};

pub const DEFAULT_JPEG_QUALITY: u8 = 75;
pub const DEFAULT_BLUR_SIGMA: f64 = 1.0;
pub const DEFAULT_BLUR_KERNEL: usize = 5;
pub const DEFAULT_BRIGHTNESS: f64 = 1.2;
pub const DEFAULT_CONTRAST: f64 = 1.2;
pub const DEFAULT_HUE_DEGREES: f64 = 20.0;
pub const DEFAULT_CROP_KEEP: f64 = 0.95;
pub const DEFAULT_RESIZE_SCALE: f64 = 0.5;
pub const DEFAULT_ROTATION_DEGREES: f64 = 1.0;
pub const DEFAULT_MEME_BAND: f64 = 0.12;

#[derive(Debug, Clone, PartialEq)]
pub enum AttackKind {
    Jpeg { quality: u8 },
    GaussianBlur { sigma: f64, kernel: usize },
    Brightness { factor: f64 },
    Contrast { factor: f64 },
    Hue { degrees: f64 },
    CenterCrop { keep: f64 },
    Resize { scale: f64 },
    Rotation { degrees: f64 },
    Meme { band: f64 },
    Overlay { config: CodecConfig, payload: WatermarkPayload },
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Jpeg { .. } => "jpeg",
            Self::GaussianBlur { .. } => "gaussian_blur",
            Self::Brightness { .. } => "brightness",
            Self::Contrast { .. } => "contrast",
            Self::Hue { .. } => "hue",
            Self::CenterCrop { .. } => "center_crop",
            Self::Resize { .. } => "resize",
            Self::Rotation { .. } => "rotation",
            Self::Meme { .. } => "meme",
            Self::Overlay { .. } => "overlay",
        }
    }

    /// The nine image-processing attacks at their declared default parameters.
    pub fn suite() -> Vec<AttackKind> {
        vec![
            Self::GaussianBlur { sigma: DEFAULT_BLUR_SIGMA, kernel: DEFAULT_BLUR_KERNEL },
            Self::Brightness { factor: DEFAULT_BRIGHTNESS },
            Self::CenterCrop { keep: DEFAULT_CROP_KEEP },
            Self::Contrast { factor: DEFAULT_CONTRAST },
            Self::Hue { degrees: DEFAULT_HUE_DEGREES },
            Self::Jpeg { quality: DEFAULT_JPEG_QUALITY },
            Self::Meme { band: DEFAULT_MEME_BAND },
            Self::Resize { scale: DEFAULT_RESIZE_SCALE },
            Self::Rotation { degrees: DEFAULT_ROTATION_DEGREES },
        ]
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |msg: String| Err(AttackError::BadParameter(msg));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            Self::Jpeg { quality } if !(1..=100).contains(&quality) => bad(format!("jpeg quality {quality} outside 1..=100")),
            Self::GaussianBlur { sigma, kernel } if !finite_pos(sigma) || kernel % 2 == 0 => {
                bad(format!("gaussian_blur needs sigma > 0 and an odd kernel, got sigma={sigma} kernel={kernel}"))
            }
            Self::Brightness { factor } | Self::Contrast { factor } if !finite_pos(factor) => {
                bad(format!("{} factor must be positive, got {factor}", self.name()))
            }
            Self::Hue { degrees } if !(-180.0..=180.0).contains(&degrees) => bad(format!("hue {degrees} outside [-180, 180]")),
            Self::CenterCrop { keep } if !(keep > 0.0 && keep <= 1.0) => bad(format!("center_crop keep {keep} outside (0, 1]")),
            Self::Resize { scale } if !finite_pos(scale) => bad(format!("resize scale must be positive, got {scale}")),
            Self::Rotation { degrees } if !degrees.is_finite() => bad("rotation angle must be finite".into()),
            Self::Meme { band } if !(band > 0.0 && band <= 0.3) => bad(format!("meme band {band} outside (0, 0.3]")),
            Self::Overlay { ref config, ref payload } => {
                config.validate().map_err(|e| AttackError::BadParameter(e.to_string()))?;
                if payload.len() != config.payload_length {
                    return bad(format!("overlay payload has {} bits, config expects {}", payload.len(), config.payload_length));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.name();
        match self {
            Self::Jpeg { quality } => write!(f, "{name}:q={quality}"),
            Self::GaussianBlur { sigma, kernel } => write!(f, "{name}:sigma={},kernel={kernel}", fmt_num(*sigma)),
            Self::Brightness { factor } | Self::Contrast { factor } => write!(f, "{name}:f={}", fmt_num(*factor)),
            Self::Hue { degrees } | Self::Rotation { degrees } => write!(f, "{name}:deg={}", fmt_num(*degrees)),
            Self::CenterCrop { keep } => write!(f, "{name}:keep={}", fmt_num(*keep)),
            Self::Resize { scale } => write!(f, "{name}:scale={}", fmt_num(*scale)),
            Self::Meme { band } => write!(f, "{name}:band={}", fmt_num(*band)),
            Self::Overlay { config, payload } => write!(
                f,
                "{name}:method={},key={},payload={},strength={},k={}",
                config.method,
                hex::encode(config.key.0),
                payload.to_hex(),
                fmt_num(config.strength),
                config.redundancy
            ),
        }
    }
}

struct Params<'a> {
    kind: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn parse(kind: &'a str, body: &'a str) -> Result<Self, AttackError> {
        let mut pairs = Vec::new();
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| AttackError::BadParameter(format!("{kind}: expected key=value, got '{item}'")))?;
            pairs.push((k.trim(), v.trim()));
        }
        Ok(Self { kind, pairs })
    }

    fn raw(&self, keys: &[&str]) -> Option<&'a str> {
        self.pairs.iter().find(|(k, _)| keys.contains(k)).map(|&(_, v)| v)
    }

    fn get<T: FromStr>(&self, keys: &[&str], default: T) -> Result<T, AttackError> {
        match self.raw(keys) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| AttackError::BadParameter(format!("{}: cannot parse {}='{v}'", self.kind, keys[0]))),
        }
    }

    fn check_known(&self, known: &[&str]) -> Result<(), AttackError> {
        match self.pairs.iter().find(|(k, _)| !known.contains(k)) {
            Some((k, _)) => Err(AttackError::BadParameter(format!("{}: unknown parameter '{k}'", self.kind))),
            None => Ok(()),
        }
    }
}

impl FromStr for AttackKind {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, body) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let p = Params::parse(name, body)?;
        let kind = match name {
            "jpeg" => {
                p.check_known(&["q", "quality"])?;
                Self::Jpeg { quality: p.get(&["q", "quality"], DEFAULT_JPEG_QUALITY)? }
            }
            "gaussian_blur" | "blur" => {
                p.check_known(&["sigma", "kernel"])?;
                Self::GaussianBlur {
                    sigma: p.get(&["sigma"], DEFAULT_BLUR_SIGMA)?,
                    kernel: p.get(&["kernel"], DEFAULT_BLUR_KERNEL)?,
                }
            }
            "brightness" => {
                p.check_known(&["f", "factor"])?;
                Self::Brightness { factor: p.get(&["f", "factor"], DEFAULT_BRIGHTNESS)? }
            }
            "contrast" => {
                p.check_known(&["f", "factor"])?;
                Self::Contrast { factor: p.get(&["f", "factor"], DEFAULT_CONTRAST)? }
            }
            "hue" => {
                p.check_known(&["deg", "degrees"])?;
                Self::Hue { degrees: p.get(&["deg", "degrees"], DEFAULT_HUE_DEGREES)? }
            }
            "center_crop" | "crop" => {
                p.check_known(&["keep"])?;
                Self::CenterCrop { keep: p.get(&["keep"], DEFAULT_CROP_KEEP)? }
            }
            "resize" => {
                p.check_known(&["scale"])?;
                Self::Resize { scale: p.get(&["scale"], DEFAULT_RESIZE_SCALE)? }
            }
            "rotation" | "rotate" => {
                p.check_known(&["deg", "degrees"])?;
                Self::Rotation { degrees: p.get(&["deg", "degrees"], DEFAULT_ROTATION_DEGREES)? }
            }
            "meme" => {
                p.check_known(&["band"])?;
                Self::Meme { band: p.get(&["band"], DEFAULT_MEME_BAND)? }
            }
            "overlay" => {
                p.check_known(&["method", "key", "payload", "strength", "k"])?;
                let missing = |what: &str| AttackError::BadParameter(format!("overlay: missing {what}"));
                let method: Method = p
                    .raw(&["method"])
                    .ok_or_else(|| missing("method"))?
                    .parse()
                    .map_err(|e: crate::watermark::CodecError| AttackError::BadParameter(e.to_string()))?;
                let key = SecretKey::from_hex(p.raw(&["key"]).ok_or_else(|| missing("key"))?)
                    .map_err(|e| AttackError::BadParameter(format!("overlay: {e}")))?;
                let payload = WatermarkPayload::from_hex(p.raw(&["payload"]).ok_or_else(|| missing("payload"))?, PayloadRole::Unauthorized)
                    .map_err(|e| AttackError::BadParameter(e.to_string()))?;
                let config = CodecConfig::new(method, key)
                    .with_payload_length(payload.len())
                    .with_strength(p.get(&["strength"], method.default_strength())?)
                    .with_redundancy(p.get(&["k"], crate::watermark::DEFAULT_REDUNDANCY)?);
                Self::Overlay { config, payload }
            }
            other => return Err(AttackError::BadParameter(format!("unknown attack '{other}'"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl Serialize for AttackKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AttackKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// An attack plus an optional seed recorded for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl AttackSpec {
    pub fn new(kind: AttackKind) -> Self {
        Self { kind, seed: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

impl FromStr for AttackSpec {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self::new(s.parse()?))
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}
