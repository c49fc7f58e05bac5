//! Corpus-mean extraction accuracy after the surrogate degradation stack.
//!
//! cargo run --release -p mimicguard-core --example surrogate_sweep -- [method] [size] [count]
//!
//! Prints the mean for each shipped severity and for a grid of custom rungs.

use mimicguard_core::channel::{degrade_with, DegradeParams, Severity};
use mimicguard_core::corpus::natural_corpus;
use mimicguard_core::watermark::{bit_accuracy, embed, extract, CodecConfig, Method, PayloadRole, SecretKey, WatermarkPayload};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let method: Method = args.first().map(|s| s.parse()).transpose()?.unwrap_or(Method::DwtDctSvd);
    let size: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(512);
    let count: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(20);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let config = CodecConfig::new(method, SecretKey::random(&mut rng));
    let payload = WatermarkPayload::random(32, PayloadRole::Unauthorized, &mut rng)?;
    let marked: Vec<_> = natural_corpus(count, size, size, 7)
        .par_iter()
        .map(|img| embed(img, &payload, &config).map(|(m, _)| m))
        .collect::<Result<_, _>>()?;

    let mean_acc = |p: &DegradeParams| -> f64 {
        let accs: Vec<f64> = marked
            .par_iter()
            .enumerate()
            .map(|(i, img)| {
                let degraded = degrade_with(img, p, 100 + i as u64).expect("degrade");
                bit_accuracy(&extract(&degraded, &config).expect("extract").bits, &payload).expect("length").acc
            })
            .collect();
        accs.iter().sum::<f64>() / accs.len() as f64
    };

    for s in [Severity::Mild, Severity::Standard, Severity::Harsh] {
        println!("{s:<9} {:?} -> {:.4}", s.params(), mean_acc(&s.params()));
    }
    let rungs: Vec<DegradeParams> = std::env::var("RUNGS")
        .unwrap_or_default()
        .split(';')
        .filter(|r| !r.trim().is_empty())
        .map(|r| {
            let v: Vec<f64> = r.split(',').map(|x| x.trim().parse().expect("number")).collect();
            DegradeParams { scale: v[0], noise_sigma: v[1], jpeg_quality: v[2] as u8, color_jitter: v[3] }
        })
        .collect();
    for p in rungs {
        println!("{p:?} -> {:.4}", mean_acc(&p));
    }
    Ok(())
}
