//! Stochastic surrogate for the mimicry fine-tune and generation pipeline.
//!
//! A [`ChannelModel`] is a distribution over the number of correctly
//! extracted payload bits per generated image. Its kernel is a beta-binomial
//! `(alpha, beta)`. Table-calibrated models are additionally *bin-stratified*:
//! the mass of each accuracy bin is pinned to the observed proportion and the
//! kernel only shapes the distribution inside each bin. Most measured rows are
//! more concentrated than any binomial, which a bare beta-binomial cannot express.

mod fit;
mod presets;
mod sample;
mod surrogate;

pub use fit::{fit_channel, stratified_with_mean};
pub use presets::{
    build_catalog, catalog_json, mixed_tail_target, preset, preset_catalog, PresetEntry, SourceRow, MIXED_DRAWS, MIXED_SHARE,
    MIXED_TAIL_BITS, MIXED_TAIL_CONFIDENCE, PRESET_IDS, SOURCE_ROWS,
};
pub use sample::{
    mix, sample_accuracies, sample_prompted, AccuracySampleSet, AccuracySource, ChannelMixture, MixCurve, PromptSpec,
    SourceTag,
};
pub use surrogate::{degrade_with, surrogate_degrade, DegradeParams, Severity};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),
    #[error("bit length mismatch: {0} vs {1}")]
    BitLengthMismatch(usize, usize),
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
    #[error("target mean {target:.3} bits is outside what the bin layout can reach")]
    UnreachableMean { target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    PaperTable,
    Fitted,
    User,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PaperTable => "paper-table",
            Self::Fitted => "fitted",
            Self::User => "user",
        }
    }
}

/// Bin index of `k` correct bits out of `n` with `bins` equal-width accuracy bins,
/// left-closed with the last bin closed.
pub fn accuracy_bin(k: usize, n: usize, bins: usize) -> usize {
    (k * bins / n).min(bins - 1)
}

/// Fixed per-bin masses over equal-width accuracy bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStrata {
    pub weights: Vec<f64>,
}

impl BinStrata {
    pub fn from_counts(counts: &[u64]) -> Result<Self, ChannelError> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(ChannelError::DegenerateHistogram("histogram is empty".into()));
        }
        Ok(Self { weights: counts.iter().map(|&c| c as f64 / total as f64).collect() })
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub n_bits: usize,
    pub alpha: f64,
    pub beta: f64,
    pub label: String,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata: Option<BinStrata>,
}

impl ChannelModel {
    /// A plain beta-binomial channel.
    pub fn beta_binomial(
        n_bits: usize,
        alpha: f64,
        beta: f64,
        label: impl Into<String>,
        provenance: Provenance,
    ) -> Result<Self, ChannelError> {
        let model = Self { n_bits, alpha, beta, label: label.into(), provenance, strata: None };
        model.validate()?;
        Ok(model)
    }

    /// Beta-binomial with mean accuracy `mean` and concentration `alpha + beta`.
    pub fn from_mean_concentration(
        n_bits: usize,
        mean: f64,
        concentration: f64,
        label: impl Into<String>,
        provenance: Provenance,
    ) -> Result<Self, ChannelError> {
        Self::beta_binomial(n_bits, mean * concentration, (1.0 - mean) * concentration, label, provenance)
    }

    pub fn with_strata(mut self, strata: BinStrata) -> Result<Self, ChannelError> {
        self.strata = Some(strata);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.n_bits == 0 {
            return Err(ChannelError::InvalidParameter("n_bits must be positive".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.beta.is_finite() && self.beta > 0.0) {
            return Err(ChannelError::InvalidParameter(format!("alpha={} beta={} must be positive", self.alpha, self.beta)));
        }
        if let Some(s) = &self.strata {
            if s.bins() == 0 || s.bins() > self.n_bits + 1 {
                return Err(ChannelError::InvalidParameter(format!("{} bins for {} bits", s.bins(), self.n_bits)));
            }
            let total: f64 = s.weights.iter().sum();
            if s.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(ChannelError::InvalidParameter("bin weights must be a distribution".into()));
            }
        }
        Ok(())
    }

    /// Kernel mean accuracy `alpha / (alpha + beta)`.
    pub fn kernel_mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn concentration(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Probability of each correct-bit count `0..=n_bits`.
    pub fn pmf(&self) -> Vec<f64> {
        let kernel = stats::beta_binomial_pmf(self.n_bits, self.alpha, self.beta);
        match &self.strata {
            None => kernel,
            Some(s) => fit::stratify(&stats::beta_binomial_log_pmf(self.n_bits, self.alpha, self.beta), &s.weights, self.n_bits),
        }
        .into_iter()
        .map(|p| p.max(0.0))
        .collect()
    }

    /// Mean number of correct bits.
    pub fn mean_bits(&self) -> f64 {
        stats::pmf_mean(&self.pmf())
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.mean_bits() / self.n_bits as f64
    }

    /// Mass in each of `bins` equal-width accuracy bins.
    pub fn bin_mass(&self, bins: usize) -> Vec<f64> {
        let mut mass = vec![0.0; bins];
        for (k, p) in self.pmf().iter().enumerate() {
            mass[accuracy_bin(k, self.n_bits, bins)] += p;
        }
        mass
    }
}

/// Degrades a model as a second fine-tuning round does: the mean shrinks by the
/// measured two-stage ratio and the bin layout follows the two-stage row.
pub fn two_stage(model: &ChannelModel) -> Result<ChannelModel, ChannelError> {
    let target = model.mean_bits() * presets::TWO_STAGE_RATIO;
    let label = format!("{}+two-stage", model.label);
    let bins = presets::two_stage_bins();
    let scaled_bins = if model.n_bits == presets::TABLE_BITS { Some(BinStrata::from_counts(&bins)?) } else { None };
    if let Some(strata) = scaled_bins {
        if let Ok(m) = stratified_with_mean(model.n_bits, &strata, model.concentration(), target, &label, Provenance::Fitted) {
            return Ok(m);
        }
    }
    // bin layout cannot reach the target: keep the kernel family and scale its mean
    ChannelModel::from_mean_concentration(
        model.n_bits,
        target / model.n_bits as f64,
        model.concentration(),
        label,
        Provenance::Fitted,
    )
}
