use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{detect, NullModel, VerificationVerdict, VerifyError, MIN_MEAN_TEST_SAMPLES};
use crate::channel::AccuracySampleSet;
use crate::imagecore::ImageBuffer;
use crate::watermark::{bit_accuracy, extract, CodecConfig, WatermarkPayload};

/// Correct-bit count of every image against `payload`, in input order.
pub fn extract_accuracies(
    images: &[ImageBuffer],
    config: &CodecConfig,
    payload: &WatermarkPayload,
) -> Result<AccuracySampleSet, VerifyError> {
    let samples = images
        .par_iter()
        .map(|img| {
            let out = extract(img, config)?;
            Ok(bit_accuracy(&out.bits, payload)?.correct_bits as u32)
        })
        .collect::<Result<Vec<u32>, VerifyError>>()?;
    Ok(AccuracySampleSet::from_counts(payload.len(), samples)?)
}

pub fn extract_and_detect(
    images: &[ImageBuffer],
    config: &CodecConfig,
    payload: &WatermarkPayload,
    null: &NullModel,
    alpha: f64,
) -> Result<VerificationVerdict, VerifyError> {
    if images.len() < MIN_MEAN_TEST_SAMPLES {
        return Err(VerifyError::TooFewSamples { got: images.len(), need: MIN_MEAN_TEST_SAMPLES });
    }
    detect(&extract_accuracies(images, config, payload)?, null, alpha)
}

/// One artist's registered watermark, optionally restricted to a prompt group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtistRecord {
    pub id: String,
    pub config: CodecConfig,
    pub payload: WatermarkPayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

/// Verifies every record independently over a shared image set. When `groups`
/// labels the images, a record with a group only sees its own images.
pub fn multi_artist_verify(
    images: &[ImageBuffer],
    groups: Option<&[String]>,
    records: &[ArtistRecord],
    null: &NullModel,
    alpha: f64,
) -> Result<BTreeMap<String, Result<VerificationVerdict, VerifyError>>, VerifyError> {
    if let Some(g) = groups {
        if g.len() != images.len() {
            return Err(VerifyError::InvalidParameter(format!("{} group labels for {} images", g.len(), images.len())));
        }
    }
    Ok(records
        .par_iter()
        .map(|r| {
            let verdict = match (groups, &r.group) {
                (Some(labels), Some(group)) => {
                    let subset: Vec<ImageBuffer> =
                        images.iter().zip(labels).filter(|(_, l)| *l == group).map(|(img, _)| img.clone()).collect();
                    extract_and_detect(&subset, &r.config, &r.payload, null, alpha)
                }
                _ => extract_and_detect(images, &r.config, &r.payload, null, alpha),
            };
            (r.id.clone(), verdict)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::natural_corpus;
    use crate::verify::{Decision, DEFAULT_ALPHA};
    use crate::watermark::{embed, Method, PayloadRole, SecretKey};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(id: &str, method: Method, seed: u64) -> ArtistRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ArtistRecord {
            id: id.into(),
            config: CodecConfig::new(method, SecretKey::random(&mut rng)),
            payload: WatermarkPayload::random(32, PayloadRole::Unauthorized, &mut rng).unwrap(),
            group: None,
        }
    }

    #[test]
    fn too_few_images() {
        let r = record("a", Method::DwtDct, 1);
        let imgs = natural_corpus(3, 128, 128, 1);
        assert!(matches!(
            extract_and_detect(&imgs, &r.config, &r.payload, &NullModel::chance(32), DEFAULT_ALPHA),
            Err(VerifyError::TooFewSamples { got: 3, need: 10 })
        ));
    }

    #[test]
    fn zero_records_is_empty() {
        let out = multi_artist_verify(&natural_corpus(2, 64, 64, 1), None, &[], &NullModel::chance(32), 0.01).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn only_the_victim_is_flagged() {
        let records = [record("a", Method::DwtDct, 1), record("b", Method::DwtDctSvd, 2), record("c", Method::DwtDct, 3)];
        let victim = &records[1];
        let images: Vec<ImageBuffer> = natural_corpus(12, 256, 256, 9)
            .iter()
            .map(|img| embed(img, &victim.payload, &victim.config).unwrap().0)
            .collect();
        let out = multi_artist_verify(&images, None, &records, &NullModel::chance(32), DEFAULT_ALPHA).unwrap();
        assert_eq!(out["b"].as_ref().unwrap().decision, Decision::TheftDetected);
        for id in ["a", "c"] {
            let v = out[id].as_ref().unwrap();
            assert_eq!(v.decision, Decision::NoEvidence, "{id}");
        }
    }

    #[test]
    fn a_failing_record_does_not_abort_others() {
        let ok = record("ok", Method::DwtDct, 1);
        let mut bad = record("bad", Method::DwtDct, 2);
        bad.config.redundancy = 2;
        let images = natural_corpus(10, 128, 128, 3);
        let out = multi_artist_verify(&images, None, &[ok, bad], &NullModel::chance(32), DEFAULT_ALPHA).unwrap();
        assert!(out["ok"].is_ok());
        assert!(matches!(out["bad"], Err(VerifyError::Codec(_))));
    }

    #[test]
    fn grouped_records_see_their_own_images() {
        let mut a = record("a", Method::DwtDct, 1);
        a.group = Some("ga".into());
        let images = natural_corpus(14, 128, 128, 4);
        let labels: Vec<String> = (0..14).map(|i| if i < 10 { "ga".into() } else { "gb".into() }).collect();
        let out = multi_artist_verify(&images, Some(&labels), &[a], &NullModel::chance(32), DEFAULT_ALPHA).unwrap();
        assert_eq!(out["a"].as_ref().unwrap().sample_count, 10);
        assert!(multi_artist_verify(&images, Some(&labels[..3]), &[], &NullModel::chance(32), 0.01).is_err());
    }
}
