//! Image-level attacks applied to watermarked content before extraction.
//!
//! Every attack returns an image of the source dimensions, so the extractor's
//! block grid stays aligned and geometric edits act as resampling noise.

pub(crate) mod ops;
mod spec;

pub use spec::{
    AttackKind, AttackSpec, DEFAULT_BLUR_KERNEL, DEFAULT_BLUR_SIGMA, DEFAULT_BRIGHTNESS, DEFAULT_CONTRAST,
    DEFAULT_CROP_KEEP, DEFAULT_HUE_DEGREES, DEFAULT_JPEG_QUALITY, DEFAULT_MEME_BAND, DEFAULT_RESIZE_SCALE,
    DEFAULT_ROTATION_DEGREES,
};

use serde::Serialize;
use thiserror::Error;

use crate::imagecore::{self, ImageBuffer, ImageError};
use crate::watermark::{self, BitAccuracy, CodecConfig, CodecError, WatermarkPayload};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("bad attack parameter: {0}")]
    BadParameter(String),
    #[error("overlay watermark does not fit: {0}")]
    OverlayCapacityExceeded(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackedImage {
    #[serde(skip)]
    pub image: ImageBuffer,
    pub applied: AttackSpec,
    /// `f64::INFINITY` when the attack left the image unchanged.
    pub psnr_vs_source: f64,
}

pub fn apply_attack(img: &ImageBuffer, spec: &AttackSpec) -> Result<AttackedImage, AttackError> {
    spec.kind.validate()?;
    let image = match &spec.kind {
        AttackKind::Jpeg { quality } => ops::jpeg(img, *quality)?,
        AttackKind::GaussianBlur { sigma, kernel } => ops::gaussian_blur(img, *sigma, *kernel),
        AttackKind::Brightness { factor } => ops::brightness(img, *factor),
        AttackKind::Contrast { factor } => ops::contrast(img, *factor),
        AttackKind::Hue { degrees } => ops::hue(img, *degrees)?,
        AttackKind::CenterCrop { keep } => ops::center_crop(img, *keep),
        AttackKind::Resize { scale } => ops::resize_round_trip(img, *scale),
        AttackKind::Rotation { degrees } => ops::rotate(img, *degrees),
        AttackKind::Meme { band } => ops::meme(img, *band),
        AttackKind::Overlay { config, payload } => match watermark::embed(img, payload, config) {
            Ok((out, _)) => out,
            Err(e @ (CodecError::CapacityExceeded { .. } | CodecError::TooSmall { .. })) => {
                return Err(AttackError::OverlayCapacityExceeded(e.to_string()))
            }
            Err(CodecError::GrayscaleRequiresDwtDct) => {
                return Err(AttackError::BadParameter("dwt-dct-svd overlay needs a colour image".into()))
            }
            Err(e) => return Err(e.into()),
        },
    };
    let psnr_vs_source = imagecore::psnr(img, &image)?;
    Ok(AttackedImage { image, applied: spec.clone(), psnr_vs_source })
}

/// Attack a watermarked image and score the extracted bits against the embedded payload.
pub fn attack_then_extract(
    img_w: &ImageBuffer,
    spec: &AttackSpec,
    config: &CodecConfig,
    payload: &WatermarkPayload,
) -> Result<BitAccuracy, AttackError> {
    if let AttackKind::Overlay { config: overlay, .. } = &spec.kind {
        if overlay.key == config.key && overlay.method == config.method {
            return Err(AttackError::BadParameter("overlay must differ from the victim codec in key or method".into()));
        }
    }
    let attacked = apply_attack(img_w, spec)?;
    let extracted = watermark::extract(&attacked.image, config)?;
    Ok(watermark::bit_accuracy(&extracted.bits, payload)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::natural_image;
    use crate::watermark::{Method, PayloadRole, SecretKey};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn marked(seed: u64, method: Method) -> (ImageBuffer, CodecConfig, WatermarkPayload) {
        let img = natural_image(256, 256, seed);
        let cfg = CodecConfig::new(method, SecretKey([seed as u8 + 1; 16]));
        let p = WatermarkPayload::random(32, PayloadRole::Unauthorized, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let (wm, _) = watermark::embed(&img, &p, &cfg).unwrap();
        (wm, cfg, p)
    }

    #[test]
    fn identity_attacks() {
        let img = natural_image(96, 96, 1);
        for s in ["brightness:f=1", "rotation:deg=0", "contrast:f=1", "center_crop:keep=1", "resize:scale=1"] {
            let out = apply_attack(&img, &s.parse().unwrap()).unwrap();
            assert_eq!(out.image, img, "{s}");
            assert_eq!(out.psnr_vs_source, f64::INFINITY);
        }
    }

    #[test]
    fn every_attack_preserves_dimensions_and_is_deterministic() {
        let img = natural_image(130, 97, 2);
        for kind in AttackKind::suite() {
            let spec = AttackSpec::new(kind).with_seed(3);
            let a = apply_attack(&img, &spec).unwrap();
            let b = apply_attack(&img, &spec).unwrap();
            assert!(a.image.same_shape(&img), "{spec}");
            assert_eq!(a, b);
            assert!(a.psnr_vs_source > 5.0 && a.psnr_vs_source.is_finite(), "{spec}: {}", a.psnr_vs_source);
        }
    }

    #[test]
    fn no_op_attack_keeps_payload() {
        let (wm, cfg, p) = marked(5, Method::DwtDctSvd);
        let acc = attack_then_extract(&wm, &"brightness:f=1.0".parse().unwrap(), &cfg, &p).unwrap();
        assert_eq!(acc.acc, 1.0);
    }

    #[test]
    fn overlay_must_differ_from_victim() {
        let (wm, cfg, p) = marked(6, Method::DwtDct);
        let same = AttackSpec::new(AttackKind::Overlay { config: cfg.clone(), payload: p.clone() });
        assert!(matches!(attack_then_extract(&wm, &same, &cfg, &p), Err(AttackError::BadParameter(_))));
        let other = AttackSpec::new(AttackKind::Overlay { config: CodecConfig::new(Method::DwtDct, SecretKey([0x55; 16])), payload: p.clone() });
        assert!(attack_then_extract(&wm, &other, &cfg, &p).is_ok());
    }

    #[test]
    fn overlay_capacity_reported() {
        let img = natural_image(64, 64, 7);
        let cfg = CodecConfig::new(Method::DwtDctSvd, SecretKey([1; 16]));
        let p = WatermarkPayload::random(32, PayloadRole::Unauthorized, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let spec = AttackSpec::new(AttackKind::Overlay { config: cfg, payload: p });
        assert!(matches!(apply_attack(&img, &spec), Err(AttackError::OverlayCapacityExceeded(_))));
    }
}
