use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::VerifyError;
use crate::channel::{accuracy_bin, sample_accuracies, AccuracySampleSet, AccuracySource};
use crate::stats;

pub const DEFAULT_ALPHA: f64 = 1e-4;
pub const DEFAULT_P0: f64 = 0.5;
/// Overdispersion assumed when no reference population is available.
pub const DEFAULT_RHO: f64 = 0.05;
pub const MIN_MEAN_TEST_SAMPLES: usize = 10;
/// Below this many samples the mean test sums the null exactly.
pub const NORMAL_APPROX_SAMPLES: usize = 30;
pub const MIN_REFERENCE_SAMPLES: usize = 100;
const MAX_RHO: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binning {
    /// 20% bins
    Five,
    /// 10% bins
    Ten,
}

impl Binning {
    pub fn bins(&self) -> usize {
        match self {
            Self::Five => 5,
            Self::Ten => 10,
        }
    }
}

impl FromStr for Binning {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "five" | "5" => Ok(Self::Five),
            "ten" | "10" => Ok(Self::Ten),
            other => Err(VerifyError::InvalidParameter(format!("unknown binning '{other}' (five|ten)"))),
        }
    }
}

/// Counts per accuracy bin; bins are left-closed except the last.
pub fn histogram(samples: &AccuracySampleSet, binning: Binning) -> Result<Vec<u64>, VerifyError> {
    if samples.is_empty() {
        return Err(VerifyError::EmptySampleSet);
    }
    let bins = binning.bins();
    let mut counts = vec![0u64; bins];
    for &k in &samples.samples {
        counts[accuracy_bin(k as usize, samples.n_bits, bins)] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub avg_bits: f64,
    pub best_bits: u32,
}

pub fn summary(samples: &AccuracySampleSet) -> Result<Summary, VerifyError> {
    let best_bits = samples.best().ok_or(VerifyError::EmptySampleSet)?;
    Ok(Summary { avg_bits: samples.mean_bits(), best_bits })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullKind {
    TheoreticalChance,
    EmpiricalReference,
}

/// Distribution of correct-bit counts when the suspect model never saw the watermark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub kind: NullKind,
    pub n_bits: usize,
    pub p0: f64,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<AccuracySampleSet>,
}

impl NullModel {
    /// Chance null: `p0 = 0.5` with the default overdispersion.
    pub fn chance(n_bits: usize) -> Self {
        Self { kind: NullKind::TheoreticalChance, n_bits, p0: DEFAULT_P0, rho: DEFAULT_RHO, reference: None }
    }

    pub fn theoretical(n_bits: usize, p0: f64, rho: f64) -> Result<Self, VerifyError> {
        let null = Self { kind: NullKind::TheoreticalChance, n_bits, p0, rho, reference: None };
        null.validate()?;
        Ok(null)
    }

    /// Null fitted to a clean reference population by the method of moments.
    pub fn empirical(reference: AccuracySampleSet) -> Result<Self, VerifyError> {
        if reference.len() < MIN_REFERENCE_SAMPLES {
            return Err(VerifyError::TooFewSamples { got: reference.len(), need: MIN_REFERENCE_SAMPLES });
        }
        let n = reference.n_bits as f64;
        let mean = reference.mean_bits();
        let var = reference.samples.iter().map(|&k| (f64::from(k) - mean).powi(2)).sum::<f64>()
            / (reference.len() - 1) as f64;
        let p0 = (mean / n).clamp(1e-3, 1.0 - 1e-3);
        let rho = if reference.n_bits > 1 { (var / (n * p0 * (1.0 - p0)) - 1.0) / (n - 1.0) } else { 0.0 };
        let null = Self {
            kind: NullKind::EmpiricalReference,
            n_bits: reference.n_bits,
            p0,
            rho: rho.clamp(0.0, MAX_RHO),
            reference: Some(reference),
        };
        null.validate()?;
        Ok(null)
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        if self.n_bits == 0 {
            return Err(VerifyError::InvalidNull("n_bits must be positive".into()));
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(VerifyError::InvalidNull(format!("p0 = {} outside (0, 1)", self.p0)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(VerifyError::InvalidNull(format!("rho = {} outside [0, 1)", self.rho)));
        }
        match (&self.kind, &self.reference) {
            (NullKind::EmpiricalReference, None) => Err(VerifyError::InvalidNull("empirical null without reference".into())),
            (NullKind::EmpiricalReference, Some(r)) if r.len() < MIN_REFERENCE_SAMPLES => {
                Err(VerifyError::TooFewSamples { got: r.len(), need: MIN_REFERENCE_SAMPLES })
            }
            _ => Ok(()),
        }
    }

    /// Per-image null mass over `0..=n_bits`.
    pub fn pmf(&self) -> Vec<f64> {
        stats::overdispersed_pmf(self.n_bits, self.p0, self.rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    TheftDetected,
    NoEvidence,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TheftDetected => "theft-detected",
            Self::NoEvidence => "no-evidence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    pub avg_bits: f64,
    pub best_bits: u32,
    pub histogram_5bin: Vec<u64>,
    pub histogram_10bin: Vec<u64>,
    /// `None` below the minimum sample count for the mean test.
    pub p_mean: Option<f64>,
    pub p_max: f64,
    pub p_ks: Option<f64>,
    pub decision: Decision,
    pub alpha_used: f64,
    pub sample_count: usize,
}

/// One-sided p-value of the mean correct-bit count exceeding the null.
fn mean_test(samples: &AccuracySampleSet, null: &NullModel) -> Option<f64> {
    let count = samples.len();
    if count < MIN_MEAN_TEST_SAMPLES {
        return None;
    }
    if count < NORMAL_APPROX_SAMPLES {
        let total: usize = samples.samples.iter().map(|&k| k as usize).sum();
        return Some(stats::upper_tail(&stats::convolve_power(&null.pmf(), count), total));
    }
    let n = null.n_bits as f64;
    let var = null.p0 * (1.0 - null.p0) * (1.0 + (n - 1.0) * null.rho) / (count as f64 * n);
    let z = (samples.mean_bits() / n - null.p0) / var.sqrt();
    Some(stats::normal_sf(z))
}

/// Tests a population of correct-bit counts against `null`.
///
/// Theft is declared when either the mean test or the max test rejects at `alpha`.
/// The KS comparison against an empirical reference is reported but does not vote.
pub fn detect(samples: &AccuracySampleSet, null: &NullModel, alpha: f64) -> Result<VerificationVerdict, VerifyError> {
    if samples.is_empty() {
        return Err(VerifyError::TooFewSamples { got: 0, need: 1 });
    }
    if samples.n_bits != null.n_bits {
        return Err(VerifyError::NullMismatch { samples: samples.n_bits, null: null.n_bits });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(VerifyError::InvalidParameter(format!("alpha = {alpha} outside (0, 1)")));
    }
    null.validate()?;
    let Summary { avg_bits, best_bits } = summary(samples)?;
    let p_mean = mean_test(samples, null);
    let p_max = stats::max_tail(&null.pmf(), best_bits as usize, samples.len());
    let p_ks = null.reference.as_ref().map(|r| stats::ks_two_sample(&samples.accuracies(), &r.accuracies()).1);
    let p_min = p_mean.map_or(p_max, |p| p.min(p_max));
    Ok(VerificationVerdict {
        avg_bits,
        best_bits,
        histogram_5bin: histogram(samples, Binning::Five)?,
        histogram_10bin: histogram(samples, Binning::Ten)?,
        p_mean,
        p_max,
        p_ks,
        decision: if p_min < alpha { Decision::TheftDetected } else { Decision::NoEvidence },
        alpha_used: alpha,
        sample_count: samples.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub sample_count: usize,
    pub detection_rate: f64,
}

/// Detection rate of `source` against `null` at each sample count, over seeded trials.
pub fn power_curve(
    source: &(impl AccuracySource + Sync),
    null: &NullModel,
    alpha: f64,
    sample_counts: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<PowerPoint>, VerifyError> {
    use rayon::prelude::*;
    if trials == 0 {
        return Err(VerifyError::InvalidParameter("trials must be positive".into()));
    }
    sample_counts
        .iter()
        .map(|&count| {
            let hits = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let set = sample_accuracies(source, count, seed ^ (count as u64) << 32 ^ t);
                    detect(&set, null, alpha).map(|v| usize::from(v.decision == Decision::TheftDetected))
                })
                .sum::<Result<usize, _>>()?;
            Ok(PowerPoint { sample_count: count, detection_rate: hits as f64 / trials as f64 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{preset, ChannelModel, Provenance};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn set(samples: Vec<u32>) -> AccuracySampleSet {
        AccuracySampleSet::from_counts(32, samples).unwrap()
    }

    /// Rebuild a population with exactly the given five-bin counts.
    fn population_with_bins(bins: [u64; 5], per_bin_k: [u32; 5]) -> AccuracySampleSet {
        let samples = bins.iter().zip(per_bin_k).flat_map(|(&c, k)| std::iter::repeat_n(k, c as usize)).collect();
        set(samples)
    }

    #[test]
    fn table_row_population_bins_back() {
        let pop = population_with_bins([0, 0, 109, 867, 24], [0, 0, 18, 20, 29]);
        assert_eq!(histogram(&pop, Binning::Five).unwrap(), vec![0, 0, 109, 867, 24]);
        assert_eq!(summary(&pop).unwrap().best_bits, 29);
    }

    #[test]
    fn perfect_samples_land_in_last_bin() {
        let s = set(vec![32; 7]);
        assert_eq!(histogram(&s, Binning::Five).unwrap(), vec![0, 0, 0, 0, 7]);
        assert_eq!(histogram(&s, Binning::Ten).unwrap()[9], 7);
    }

    #[test]
    fn empty_set_errors() {
        let s = set(vec![]);
        assert!(matches!(histogram(&s, Binning::Five), Err(VerifyError::EmptySampleSet)));
        assert!(matches!(summary(&s), Err(VerifyError::EmptySampleSet)));
        assert!(matches!(detect(&s, &NullModel::chance(32), DEFAULT_ALPHA), Err(VerifyError::TooFewSamples { .. })));
    }

    #[test]
    fn singleton_summary() {
        assert_eq!(summary(&set(vec![21])).unwrap(), Summary { avg_bits: 21.0, best_bits: 21 });
    }

    #[test]
    fn clean_preset_five_bin_proportions() {
        let s = sample_accuracies(&preset("t1-artist-clean").unwrap(), 10_000, 3);
        let h = histogram(&s, Binning::Five).unwrap();
        for (c, target) in h.iter().zip([0.0, 0.255, 0.741, 0.004, 0.0]) {
            assert!((*c as f64 / 10_000.0 - target).abs() <= 0.03);
        }
    }

    #[test]
    fn watermarked_population_is_detected_strongly() {
        let s = sample_accuracies(&preset("t1-artist-watermarked").unwrap(), 1000, 8);
        let v = detect(&s, &NullModel::chance(32), DEFAULT_ALPHA).unwrap();
        assert_eq!(v.decision, Decision::TheftDetected);
        assert!(v.p_mean.unwrap() < 1e-10);
        assert_eq!(v.histogram_5bin.iter().sum::<u64>(), 1000);
        assert_eq!(v.histogram_10bin.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn mean_z_matches_hand_computation() {
        // 40 samples averaging 18 bits: z = (18/32 - 0.5) / sqrt(0.25 * (1 + 31 * 0.05) / (40 * 32))
        let s = set([17u32, 19].repeat(20));
        let v = detect(&s, &NullModel::chance(32), DEFAULT_ALPHA).unwrap();
        let z = 0.0625 / (0.25 * 2.55 / 1280.0f64).sqrt();
        assert_abs_diff_eq!(v.p_mean.unwrap(), stats::normal_sf(z), epsilon = 1e-15);
    }

    #[test]
    fn exact_mean_test_for_small_samples() {
        // with rho = 0 the null sum of N draws is Binomial(N * 32, p0)
        let null = NullModel::theoretical(32, 0.5, 0.0).unwrap();
        let s = set(vec![20; 12]);
        let v = detect(&s, &null, DEFAULT_ALPHA).unwrap();
        let direct = stats::upper_tail(&stats::binomial_pmf(12 * 32, 0.5), 240);
        assert_abs_diff_eq!(v.p_mean.unwrap(), direct, epsilon = 1e-12);
        assert_eq!(detect(&set(vec![20; 9]), &null, DEFAULT_ALPHA).unwrap().p_mean, None);
    }

    #[test]
    fn samples_at_half_are_no_evidence() {
        let v = detect(&set(vec![16; 10]), &NullModel::chance(32), DEFAULT_ALPHA).unwrap();
        assert_eq!(v.decision, Decision::NoEvidence);
    }

    #[test]
    fn null_mismatch_and_invalid_nulls() {
        let s = AccuracySampleSet::from_counts(16, vec![8; 20]).unwrap();
        assert!(matches!(detect(&s, &NullModel::chance(32), 0.01), Err(VerifyError::NullMismatch { samples: 16, null: 32 })));
        assert!(NullModel::theoretical(32, 1.0, 0.1).is_err());
        assert!(NullModel::theoretical(32, 0.5, 1.0).is_err());
        assert!(matches!(NullModel::empirical(set(vec![16; 50])), Err(VerifyError::TooFewSamples { got: 50, need: 100 })));
    }

    #[test]
    fn empirical_null_recovers_moments() {
        let truth = ChannelModel::from_mean_concentration(32, 0.45, 1.0 / 0.1 - 1.0, "ref", Provenance::User).unwrap();
        let reference = sample_accuracies(&truth, 20_000, 5);
        let null = NullModel::empirical(reference).unwrap();
        assert_eq!(null.kind, NullKind::EmpiricalReference);
        assert!((null.p0 - 0.45).abs() < 0.01, "{}", null.p0);
        assert!((null.rho - 0.1).abs() < 0.02, "{}", null.rho);
        // a sample from the reference distribution itself yields a large KS p-value
        let v = detect(&sample_accuracies(&truth, 500, 6), &null, DEFAULT_ALPHA).unwrap();
        assert!(v.p_ks.unwrap() > 0.01);
    }

    #[test]
    fn binning_parses() {
        assert_eq!("ten".parse::<Binning>().unwrap(), Binning::Ten);
        assert!("seven".parse::<Binning>().is_err());
        assert_eq!(Decision::TheftDetected.to_string(), "theft-detected");
        assert_eq!(serde_json::to_string(&Decision::NoEvidence).unwrap(), "\"no-evidence\"");
    }

    #[test]
    fn power_curve_increases_with_n() {
        let w = preset("t1-artist-watermarked").unwrap();
        let curve = power_curve(&w, &NullModel::chance(32), DEFAULT_ALPHA, &[10, 30, 100], 200, 1).unwrap();
        assert!(curve.windows(2).all(|p| p[1].detection_rate >= p[0].detection_rate));
        assert!(curve[2].detection_rate > 0.99);
    }

    proptest! {
        #[test]
        fn five_bins_aggregate_ten(samples in proptest::collection::vec(0u32..=32, 1..300)) {
            let s = set(samples);
            let ten = histogram(&s, Binning::Ten).unwrap();
            let five = histogram(&s, Binning::Five).unwrap();
            let folded: Vec<u64> = ten.chunks(2).map(|c| c[0] + c[1]).collect();
            prop_assert_eq!(five, folded);
        }

        #[test]
        fn verdict_invariant_under_reordering(mut samples in proptest::collection::vec(0u32..=32, 1..200), seed in any::<u64>()) {
            let null = NullModel::chance(32);
            let a = detect(&set(samples.clone()), &null, 0.01).unwrap();
            use rand::{seq::SliceRandom, SeedableRng};
            samples.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = detect(&set(samples), &null, 0.01).unwrap();
            prop_assert_eq!(a.decision, b.decision);
            prop_assert_eq!(a.p_max, b.p_max);
            prop_assert!((a.p_mean.unwrap_or(1.0) - b.p_mean.unwrap_or(1.0)).abs() < 1e-12);
        }

        #[test]
        fn decision_follows_min_p(samples in proptest::collection::vec(8u32..=32, 1..120), alpha in 1e-6f64..0.2) {
            let v = detect(&set(samples), &NullModel::chance(32), alpha).unwrap();
            let p_min = v.p_mean.map_or(v.p_max, |p| p.min(v.p_max));
            prop_assert_eq!(v.decision == Decision::TheftDetected, p_min < alpha);
        }

        // a new perfect sample raises the best; once the best is already perfect,
        // the max test can only grow with N, so the property is about imperfect sets
        #[test]
        fn perfect_sample_never_raises_p_max(
            samples in proptest::collection::vec(0u32..32, 1..200),
            p0 in 0.3f64..0.7,
            rho in 0.0f64..0.2,
        ) {
            let null = NullModel::theoretical(32, p0, rho).unwrap();
            let before = detect(&set(samples.clone()), &null, 0.01).unwrap().p_max;
            let mut more = samples;
            more.push(32);
            let after = detect(&set(more), &null, 0.01).unwrap().p_max;
            prop_assert!(after <= before * (1.0 + 1e-12), "{} -> {}", before, after);
        }
    }
}
