//! Discrete distributions and test statistics shared by the channel and
//! verification layers.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Binomial(n, p) probability mass over `0..=n`.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 || p >= 1.0 {
        let mut pmf = vec![0.0; n + 1];
        pmf[if p <= 0.0 { 0 } else { n }] = 1.0;
        return pmf;
    }
    (0..=n).map(|k| (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()).collect()
}

/// Natural log of the beta-binomial(n, alpha, beta) mass over `0..=n`.
pub fn beta_binomial_log_pmf(n: usize, alpha: f64, beta: f64) -> Vec<f64> {
    let base = ln_beta(alpha, beta);
    (0..=n).map(|k| ln_choose(n, k) + ln_beta(k as f64 + alpha, (n - k) as f64 + beta) - base).collect()
}

/// Beta-binomial(n, alpha, beta) probability mass over `0..=n`.
pub fn beta_binomial_pmf(n: usize, alpha: f64, beta: f64) -> Vec<f64> {
    let mut pmf: Vec<f64> = beta_binomial_log_pmf(n, alpha, beta).into_iter().map(f64::exp).collect();
    normalize(&mut pmf);
    pmf
}

/// Per-trial null mass: beta-binomial with mean `p0` and intra-class correlation
/// `rho`, collapsing to the binomial at `rho = 0`.
pub fn overdispersed_pmf(n: usize, p0: f64, rho: f64) -> Vec<f64> {
    if rho <= 1e-12 {
        return binomial_pmf(n, p0);
    }
    let s = 1.0 / rho - 1.0;
    beta_binomial_pmf(n, p0 * s, (1.0 - p0) * s)
}

pub(crate) fn normalize(pmf: &mut [f64]) {
    let total: f64 = pmf.iter().sum();
    if total > 0.0 {
        pmf.iter_mut().for_each(|p| *p /= total);
    }
}

pub fn pmf_mean(pmf: &[f64]) -> f64 {
    pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
}

pub fn pmf_variance(pmf: &[f64]) -> f64 {
    let m = pmf_mean(pmf);
    pmf.iter().enumerate().map(|(k, p)| (k as f64 - m).powi(2) * p).sum()
}

/// `P(K >= k)`, summed from the top so small tails keep their precision.
pub fn upper_tail(pmf: &[f64], k: usize) -> f64 {
    if k >= pmf.len() {
        return 0.0;
    }
    pmf[k..].iter().rev().sum::<f64>().min(1.0)
}

/// Mass of the sum of `count` i.i.d. draws.
pub fn convolve_power(pmf: &[f64], count: usize) -> Vec<f64> {
    let mut acc = vec![1.0];
    for _ in 0..count {
        let mut next = vec![0.0; acc.len() + pmf.len() - 1];
        for (i, a) in acc.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, p) in pmf.iter().enumerate() {
                next[i + j] += a * p;
            }
        }
        acc = next;
    }
    acc
}

/// `P(max of count draws >= k) = 1 - (1 - P(K >= k))^count`, stable for tiny tails.
pub fn max_tail(pmf: &[f64], k: usize, count: usize) -> f64 {
    let tail = upper_tail(pmf, k);
    if tail >= 1.0 {
        return 1.0;
    }
    -((count as f64) * (-tail).ln_1p()).exp_m1()
}

/// Upper tail of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    Normal::standard().sf(z)
}

/// Upper tail of a chi-square variate.
pub fn chi_square_sf(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).expect("positive dof").sf(stat)
}

/// Pearson goodness of fit of observed counts against expected proportions.
/// Cells with zero expected mass must be empty and are dropped from the degrees of freedom.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &e) in observed.iter().zip(expected) {
        if e <= 0.0 {
            if o > 0 {
                return (f64::INFINITY, 0.0);
            }
            continue;
        }
        let exp = e * total as f64;
        stat += (o as f64 - exp).powi(2) / exp;
        cells += 1;
    }
    (stat, chi_square_sf(stat, cells.saturating_sub(1)))
}

/// Kolmogorov distribution survival function `Q(λ) = 2 Σ (-1)^{j-1} exp(-2 j² λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov: returns the statistic `D` and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty(), "KS needs two nonempty samples");
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    (d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d))
}
