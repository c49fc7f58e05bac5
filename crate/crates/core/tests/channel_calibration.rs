use mimicguard_core::channel::{
    accuracy_bin, mix, preset, preset_catalog, sample_accuracies, two_stage, Provenance, SOURCE_ROWS,
};
use mimicguard_core::stats::chi_square_gof;

const DRAWS: usize = 10_000;

fn bin_counts(samples: &[u32], n_bits: usize, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for &k in samples {
        counts[accuracy_bin(k as usize, n_bits, bins)] += 1;
    }
    counts
}

fn proportions(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

#[test]
fn quoted_rows_are_carried_verbatim() {
    let expect = [
        ("t1-artist-watermarked", Some(vec![0u64, 0, 109, 867, 24]), 19.54, Some(29)),
        ("t1-artist-clean", Some(vec![0, 255, 741, 4, 0]), 14.03, Some(21)),
        ("t2-dwt-dct-svd", Some(vec![0, 37, 482, 454, 27]), 18.57, Some(30)),
        ("t3-normal-finetune", Some(vec![0, 0, 0, 0, 0, 261, 640, 81, 13, 5]), 19.96, Some(29)),
        ("t3-two-stage-finetune", Some(vec![0, 0, 0, 11, 125, 245, 571, 44, 4, 0]), 19.02, Some(26)),
        ("t3-meme", Some(vec![1, 0, 12, 115, 315, 263, 275, 18, 1, 0]), 16.86, Some(26)),
        ("t4-strange-characters", None, 21.06, Some(27)),
    ];
    for (id, bins, avg, best) in expect {
        let e = preset_catalog().iter().find(|e| e.id == id).unwrap();
        assert_eq!(e.bins, bins, "{id}");
        assert_eq!(e.avg, avg, "{id}");
        assert_eq!(e.best, best, "{id}");
    }
    // every binned row describes 1000 images, except one row printed with 991
    for r in SOURCE_ROWS.iter().filter(|r| r.bins.is_some()) {
        let total: u64 = r.bins.unwrap().iter().sum();
        assert_eq!(total, if r.id == "t1-natural-clean" { 991 } else { 1000 }, "{}", r.id);
    }
}

#[test]
fn every_preset_reproduces_its_row() {
    for (i, e) in preset_catalog().iter().enumerate() {
        let model = preset(&e.id).unwrap();
        let set = sample_accuracies(&model, DRAWS, 1000 + i as u64);
        assert!((set.mean_bits() - e.avg).abs() <= 0.5, "{}: mean {} vs {}", e.id, set.mean_bits(), e.avg);
        if let Some(bins) = &e.bins {
            let observed = bin_counts(&set.samples, 32, bins.len());
            let (_, p) = chi_square_gof(&observed, &proportions(bins));
            assert!(p > 0.01, "{}: chi-square p = {p}", e.id);
            assert_eq!(e.provenance, Provenance::PaperTable);
        }
    }
}

#[test]
fn named_preset_means() {
    for (id, avg) in [("t1-artist-watermarked", 19.54), ("t1-artist-clean", 14.03), ("t3-normal-finetune", 19.96)] {
        assert!((preset(id).unwrap().mean_bits() - avg).abs() < 1e-6);
    }
}

#[test]
fn two_stage_lands_on_the_two_stage_row() {
    let normal = preset("t3-normal-finetune").unwrap();
    let degraded = two_stage(&normal).unwrap();
    assert!((degraded.mean_bits() - 19.02).abs() < 1e-6, "{}", degraded.mean_bits());
    let row = [0u64, 0, 0, 11, 125, 245, 571, 44, 4, 0];
    let set = sample_accuracies(&degraded, DRAWS, 77);
    let (_, p) = chi_square_gof(&bin_counts(&set.samples, 32, 10), &proportions(&row));
    assert!(p > 0.01, "p = {p}");
    for id in ["t1-artist-watermarked", "t2-dwt-dct", "t3-meme"] {
        let m = preset(id).unwrap();
        assert!(two_stage(&m).unwrap().mean_bits() <= m.mean_bits());
    }
}

#[test]
fn mixture_mean_is_nondecreasing_in_share() {
    let (w, c) = (preset("s54-mixed-watermarked").unwrap(), preset("t1-artist-clean").unwrap());
    let means: Vec<f64> = [0.0, 0.1, 0.4, 0.8, 1.0]
        .iter()
        .enumerate()
        .map(|(i, &p)| sample_accuracies(&mix(&w, &c, p).unwrap(), DRAWS, 40 + i as u64).mean_bits())
        .collect();
    assert!(means.windows(2).all(|m| m[1] >= m[0] - 0.1), "{means:?}");
}

#[test]
fn mixture_endpoints_match_components() {
    let (w, c) = (preset("t1-artist-watermarked").unwrap(), preset("t1-artist-clean").unwrap());
    let clean = sample_accuracies(&c, DRAWS, 5);
    let p0 = sample_accuracies(&mix(&w, &c, 0.0).unwrap(), DRAWS, 6);
    let (_, p) = mimicguard_core::stats::ks_two_sample(&clean.accuracies(), &p0.accuracies());
    assert!(p > 0.01, "p = {p}");
    let full = sample_accuracies(&mix(&w, &c, 1.0).unwrap(), DRAWS, 7);
    assert!(full.groups.iter().all(|g| g == "t1-artist-watermarked"));
}

#[test]
fn small_share_reaches_high_best() {
    let (w, c) = (preset("s54-mixed-watermarked").unwrap(), preset("t1-artist-clean").unwrap());
    let m = mix(&w, &c, 0.1).unwrap();
    let hits = (0..50u64).filter(|s| sample_accuracies(&m, 1000, 900 + s).best().unwrap() >= 27).count();
    assert!(hits >= 45, "{hits}/50 runs reached 27 bits");
}
