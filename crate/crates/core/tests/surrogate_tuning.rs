//! Corpus-mean extraction accuracy of the dwt-dct-svd codec after each surrogate severity.

use mimicguard_core::channel::{surrogate_degrade, Severity};
use mimicguard_core::corpus::natural_corpus;
use mimicguard_core::watermark::{bit_accuracy, embed, extract, CodecConfig, Method, PayloadRole, SecretKey, WatermarkPayload};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn corpus_mean(severity: Severity) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let config = CodecConfig::new(Method::DwtDctSvd, SecretKey::random(&mut rng));
    let payload = WatermarkPayload::random(32, PayloadRole::Unauthorized, &mut rng).unwrap();
    let accs: Vec<f64> = natural_corpus(20, 512, 512, 7)
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let (marked, _) = embed(img, &payload, &config).unwrap();
            let degraded = surrogate_degrade(&marked, severity, 100 + i as u64).unwrap();
            bit_accuracy(&extract(&degraded, &config).unwrap().bits, &payload).unwrap().acc
        })
        .collect();
    accs.iter().sum::<f64>() / accs.len() as f64
}

#[test]
fn mild_keeps_most_bits() {
    let acc = corpus_mean(Severity::Mild);
    assert!(acc >= 0.8, "{acc}");
}

#[test]
fn standard_lands_in_the_watermarked_band() {
    let acc = corpus_mean(Severity::Standard);
    assert!((0.55..=0.70).contains(&acc), "{acc}");
}

#[test]
fn harsh_is_no_better_than_standard() {
    assert!(corpus_mean(Severity::Harsh) <= corpus_mean(Severity::Standard));
}
