use super::{accuracy_bin, BinStrata, ChannelError, ChannelModel, Provenance};
use crate::stats;

const MAX_CONCENTRATION: f64 = 1e6;
const MIN_CONCENTRATION: f64 = 0.05;

/// Distribute each bin's weight over its counts in proportion to the kernel.
pub(super) fn stratify(log_pmf: &[f64], weights: &[f64], n: usize) -> Vec<f64> {
    let bins = weights.len();
    let mut pmf = vec![0.0; n + 1];
    for (b, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let ks: Vec<usize> = (0..=n).filter(|&k| accuracy_bin(k, n, bins) == b).collect();
        let top = ks.iter().map(|&k| log_pmf[k]).fold(f64::NEG_INFINITY, f64::max);
        let rel: Vec<f64> = ks.iter().map(|&k| (log_pmf[k] - top).exp()).collect();
        let total: f64 = rel.iter().sum();
        for (&k, r) in ks.iter().zip(rel) {
            pmf[k] = w * r / total;
        }
    }
    pmf
}

fn stratified_mean(n: usize, weights: &[f64], pi: f64, s: f64) -> f64 {
    stats::pmf_mean(&stratify(&stats::beta_binomial_log_pmf(n, pi * s, (1.0 - pi) * s), weights, n))
}

/// Bin-stratified model whose overall mean is `target_bits`, solving the kernel
/// mean by bisection. When the target is out of reach at concentration `s`, the
/// kernel is sharpened (a sharper kernel pushes each bin's mass to its edges).
pub fn stratified_with_mean(
    n: usize,
    strata: &BinStrata,
    concentration: f64,
    target_bits: f64,
    label: &str,
    provenance: Provenance,
) -> Result<ChannelModel, ChannelError> {
    let (lo, hi) = (1e-6, 1.0 - 1e-6);
    let mut s = concentration.max(MIN_CONCENTRATION);
    loop {
        let (f_lo, f_hi) = (stratified_mean(n, &strata.weights, lo, s), stratified_mean(n, &strata.weights, hi, s));
        if (f_lo..=f_hi).contains(&target_bits) {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if stratified_mean(n, &strata.weights, mid, s) < target_bits {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let pi = 0.5 * (a + b);
            return ChannelModel::beta_binomial(n, pi * s, (1.0 - pi) * s, label, provenance)?.with_strata(strata.clone());
        }
        if s >= 1e8 {
            return Err(ChannelError::UnreachableMean { target: target_bits });
        }
        s *= 10.0;
    }
}

fn kernel_bin_mass(n: usize, bins: usize, pi: f64, s: f64) -> Vec<f64> {
    let mut mass = vec![0.0; bins];
    for (k, p) in stats::beta_binomial_pmf(n, pi * s, (1.0 - pi) * s).iter().enumerate() {
        mass[accuracy_bin(k, n, bins)] += p;
    }
    mass
}

fn chi_square(counts: &[u64], mass: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(mass)
        .map(|(&o, &m)| {
            let e = (m * total as f64).max(1e-12);
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

/// Fit a channel to a histogram of per-image accuracies over equal-width bins.
///
/// The kernel comes from moment matching on bin midpoints (with within-bin
/// spread), refined on a grid by chi-square between kernel bin mass and the
/// observed counts; the result is then stratified on the observed proportions.
/// Bin counts do not determine the mean, so a known average can be supplied.
pub fn fit_channel(histogram: &[u64], n_bits: usize, target_avg: Option<f64>) -> Result<ChannelModel, ChannelError> {
    let bins = histogram.len();
    if bins == 0 || bins > n_bits + 1 {
        return Err(ChannelError::DegenerateHistogram(format!("{bins} bins for {n_bits} bits")));
    }
    let strata = BinStrata::from_counts(histogram)?;
    let occupied: Vec<usize> = (0..bins).filter(|&b| histogram[b] > 0).collect();
    if occupied.len() == 1 && (occupied[0] == 0 || occupied[0] == bins - 1) {
        return Err(ChannelError::DegenerateHistogram("all mass in a single extreme bin".into()));
    }

    let n = n_bits as f64;
    let width = n / bins as f64;
    let mids: Vec<f64> = (0..bins).map(|b| (b as f64 + 0.5) * width).collect();
    let mean: f64 = strata.weights.iter().zip(&mids).map(|(w, m)| w * m).sum();
    let var: f64 = strata.weights.iter().zip(&mids).map(|(w, m)| w * (m - mean).powi(2)).sum::<f64>() + width * width / 12.0;
    let pi0 = (mean / n).clamp(0.01, 0.99);
    let ratio = var / (n * pi0 * (1.0 - pi0));
    let s0 = if ratio > 1.0 + 1e-9 { (n - ratio) / (ratio - 1.0) } else { MAX_CONCENTRATION };
    let s0 = s0.clamp(MIN_CONCENTRATION, MAX_CONCENTRATION);

    let mut best = (chi_square(histogram, &kernel_bin_mass(n_bits, bins, pi0, s0)), pi0, s0);
    for i in -30..=30 {
        let pi = pi0 + 0.005 * f64::from(i);
        if !(0.005..=0.995).contains(&pi) {
            continue;
        }
        for j in -30..=30 {
            let s = 10f64.powf(s0.log10() + 0.1 * f64::from(j)).clamp(MIN_CONCENTRATION, MAX_CONCENTRATION);
            let chi = chi_square(histogram, &kernel_bin_mass(n_bits, bins, pi, s));
            if chi < best.0 {
                best = (chi, pi, s);
            }
        }
    }
    let (_, pi, s) = best;
    match target_avg {
        Some(t) => stratified_with_mean(n_bits, &strata, s, t, "fitted", Provenance::Fitted),
        None => ChannelModel::beta_binomial(n_bits, pi * s, (1.0 - pi) * s, "fitted", Provenance::Fitted)?.with_strata(strata),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Beta, Binomial, Distribution};

    // independent sampler: draw p ~ Beta, then K ~ Binomial(n, p)
    fn beta_binomial_histogram(n: u64, a: f64, b: f64, draws: usize, bins: usize) -> (Vec<u64>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let beta = Beta::new(a, b).unwrap();
        let mut hist = vec![0u64; bins];
        let mut sum = 0u64;
        for _ in 0..draws {
            let k = Binomial::new(n, beta.sample(&mut rng)).unwrap().sample(&mut rng);
            hist[accuracy_bin(k as usize, n as usize, bins)] += 1;
            sum += k;
        }
        (hist, sum as f64 / draws as f64)
    }

    #[test]
    fn recovers_known_beta_binomial() {
        let (hist, _) = beta_binomial_histogram(32, 8.0, 5.0, 100_000, 10);
        let m = fit_channel(&hist, 32, None).unwrap();
        assert!((m.mean_bits() - 32.0 * 8.0 / 13.0).abs() < 0.1, "mean {}", m.mean_bits());
    }

    #[test]
    fn single_middle_bin_bounds_the_mean() {
        let m = fit_channel(&[0, 0, 1000, 0, 0], 32, None).unwrap();
        assert!((12.8..=19.2).contains(&m.mean_bits()), "{}", m.mean_bits());
    }

    #[test]
    fn extreme_single_bin_is_degenerate() {
        assert!(matches!(fit_channel(&[0, 0, 0, 0, 50], 32, None), Err(ChannelError::DegenerateHistogram(_))));
        assert!(matches!(fit_channel(&[7, 0, 0, 0, 0], 32, None), Err(ChannelError::DegenerateHistogram(_))));
        assert!(matches!(fit_channel(&[0, 0, 0], 32, None), Err(ChannelError::DegenerateHistogram(_))));
        assert!(fit_channel(&[], 32, None).is_err());
    }

    #[test]
    fn target_average_is_met_exactly() {
        let m = fit_channel(&[0, 0, 109, 867, 24], 32, Some(19.54)).unwrap();
        assert_abs_diff_eq!(m.mean_bits(), 19.54, epsilon = 1e-6);
        for (a, b) in m.bin_mass(5).iter().zip([0.0, 0.0, 0.109, 0.867, 0.024]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn unreachable_target_reported() {
        // every count sits in 40-60% (13..=19 bits), so 25 bits is impossible
        let err = fit_channel(&[0, 0, 10, 0, 0], 32, Some(25.0)).unwrap_err();
        assert!(matches!(err, ChannelError::UnreachableMean { .. }));
    }

    #[test]
    fn stratified_mean_is_monotone_in_kernel_mean() {
        let w = [0.0, 0.2, 0.5, 0.3, 0.0];
        let means: Vec<f64> = (1..20).map(|i| stratified_mean(32, &w, f64::from(i) / 20.0, 50.0)).collect();
        assert!(means.windows(2).all(|p| p[0] < p[1]));
    }
}
