use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{ChannelError, ChannelModel, Provenance};

/// Label and provenance of a model that contributed samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTag {
    pub label: String,
    pub provenance: Provenance,
}

/// Per-image correct-bit counts plus optional group labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySampleSet {
    pub n_bits: usize,
    pub seed: Option<u64>,
    pub samples: Vec<u32>,
    #[serde(default)]
    pub groups: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceTag>,
}

impl AccuracySampleSet {
    /// Counts measured outside the channel (e.g. real extractions).
    pub fn from_counts(n_bits: usize, samples: Vec<u32>) -> Result<Self, ChannelError> {
        let set = Self { n_bits, seed: None, samples, groups: Vec::new(), sources: Vec::new() };
        set.validate()?;
        Ok(set)
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self, ChannelError> {
        self.groups = groups;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.n_bits == 0 {
            return Err(ChannelError::InvalidParameter("n_bits must be positive".into()));
        }
        if let Some(k) = self.samples.iter().find(|&&k| k as usize > self.n_bits) {
            return Err(ChannelError::InvalidParameter(format!("sample {k} exceeds {} bits", self.n_bits)));
        }
        if !self.groups.is_empty() && self.groups.len() != self.samples.len() {
            return Err(ChannelError::InvalidParameter(format!(
                "{} group labels for {} samples",
                self.groups.len(),
                self.samples.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_bits(&self) -> f64 {
        self.samples.iter().map(|&k| f64::from(k)).sum::<f64>() / self.samples.len().max(1) as f64
    }

    pub fn best(&self) -> Option<u32> {
        self.samples.iter().copied().max()
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.samples.iter().map(|&k| f64::from(k) / self.n_bits as f64).collect()
    }

    /// Distinct group labels in order of first appearance.
    pub fn group_labels(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for g in &self.groups {
            if !seen.contains(g) {
                seen.push(g.clone());
            }
        }
        seen
    }

    /// Samples carrying group label `group`.
    pub fn subset(&self, group: &str) -> Self {
        let picked: Vec<(u32, String)> = self
            .samples
            .iter()
            .zip(&self.groups)
            .filter(|(_, g)| g.as_str() == group)
            .map(|(&k, g)| (k, g.clone()))
            .collect();
        let (samples, groups) = picked.into_iter().unzip();
        Self { n_bits: self.n_bits, seed: self.seed, samples, groups, sources: self.sources.clone() }
    }
}

/// Mapping from the watermarked share of the fine-tuning set to the share of
/// generated images that behave like the watermarked channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MixCurve {
    Identity,
    /// `q(p) = p^gamma`
    Power { gamma: f64 },
}

impl MixCurve {
    pub fn apply(&self, p: f64) -> f64 {
        match *self {
            Self::Identity => p,
            Self::Power { gamma } => p.powf(gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMixture {
    pub watermarked: ChannelModel,
    pub clean: ChannelModel,
    pub p_watermarked: f64,
    pub curve: MixCurve,
}

impl ChannelMixture {
    pub fn with_curve(mut self, curve: MixCurve) -> Result<Self, ChannelError> {
        if let MixCurve::Power { gamma } = curve {
            if !(gamma.is_finite() && gamma > 0.0) {
                return Err(ChannelError::InvalidParameter(format!("curve exponent {gamma} must be positive")));
            }
        }
        self.curve = curve;
        Ok(self)
    }

    /// Probability that a draw comes from the watermarked component.
    pub fn q(&self) -> f64 {
        self.curve.apply(self.p_watermarked).clamp(0.0, 1.0)
    }

    pub fn pmf(&self) -> Vec<f64> {
        let q = self.q();
        self.watermarked.pmf().iter().zip(self.clean.pmf()).map(|(w, c)| q * w + (1.0 - q) * c).collect()
    }

    pub fn mean_bits(&self) -> f64 {
        crate::stats::pmf_mean(&self.pmf())
    }
}

/// Mixed fine-tuning: draws follow `model_w` with probability `q(p)`.
pub fn mix(model_w: &ChannelModel, model_clean: &ChannelModel, p_watermarked: f64) -> Result<ChannelMixture, ChannelError> {
    if model_w.n_bits != model_clean.n_bits {
        return Err(ChannelError::BitLengthMismatch(model_w.n_bits, model_clean.n_bits));
    }
    if !(0.0..=1.0).contains(&p_watermarked) {
        return Err(ChannelError::InvalidParameter(format!("watermarked share {p_watermarked} outside [0, 1]")));
    }
    Ok(ChannelMixture {
        watermarked: model_w.clone(),
        clean: model_clean.clone(),
        p_watermarked,
        curve: MixCurve::Identity,
    })
}

/// Anything that yields correct-bit counts: a single model or a mixture.
pub trait AccuracySource {
    fn n_bits(&self) -> usize;
    /// Weighted components; the weights sum to one.
    fn components(&self) -> Vec<(f64, &ChannelModel)>;
}

impl AccuracySource for ChannelModel {
    fn n_bits(&self) -> usize {
        self.n_bits
    }

    fn components(&self) -> Vec<(f64, &ChannelModel)> {
        vec![(1.0, self)]
    }
}

impl AccuracySource for ChannelMixture {
    fn n_bits(&self) -> usize {
        self.watermarked.n_bits
    }

    fn components(&self) -> Vec<(f64, &ChannelModel)> {
        let q = self.q();
        vec![(q, &self.watermarked), (1.0 - q, &self.clean)]
    }
}

/// Inverse-CDF table over `u64` draws; sampling touches no floating point.
/// Thresholds are cumulative masses in units of `2^-64`.
struct CdfTable {
    thresholds: Vec<u128>,
}

impl CdfTable {
    fn new(masses: &[f64]) -> Self {
        let total: f64 = masses.iter().sum();
        let mut acc = 0.0;
        let one = 1u128 << 64;
        let mut thresholds: Vec<u128> = masses
            .iter()
            .map(|m| {
                acc += m / total;
                ((acc.min(1.0) * 18_446_744_073_709_551_616.0) as u128).min(one)
            })
            .collect();
        if let Some(last) = thresholds.last_mut() {
            *last = one;
        }
        Self { thresholds }
    }

    fn draw(&self, u: u64) -> usize {
        self.thresholds.partition_point(|&t| t <= u128::from(u)).min(self.thresholds.len() - 1)
    }
}

struct Sampler<'a> {
    pick: CdfTable,
    tables: Vec<(CdfTable, &'a ChannelModel)>,
}

impl<'a> Sampler<'a> {
    fn new(source: &'a impl AccuracySource) -> Self {
        let comps = source.components();
        let pick = CdfTable::new(&comps.iter().map(|(w, _)| *w).collect::<Vec<_>>());
        let tables = comps.into_iter().map(|(_, m)| (CdfTable::new(&m.pmf()), m)).collect();
        Self { pick, tables }
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> (u32, &'a str) {
        let c = if self.tables.len() > 1 { self.pick.draw(rng.next_u64()) } else { 0 };
        let (table, model) = &self.tables[c];
        (table.draw(rng.next_u64()) as u32, model.label.as_str())
    }
}

fn tags(source: &impl AccuracySource) -> Vec<SourceTag> {
    source
        .components()
        .iter()
        .map(|(_, m)| SourceTag { label: m.label.clone(), provenance: m.provenance })
        .collect()
}

/// `count` i.i.d. draws, deterministic in `seed`.
pub fn sample_accuracies(source: &impl AccuracySource, count: usize, seed: u64) -> AccuracySampleSet {
    let sampler = Sampler::new(source);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (samples, groups) = (0..count).map(|_| sampler.draw(&mut rng)).map(|(k, g)| (k, g.to_string())).unzip();
    AccuracySampleSet { n_bits: source.n_bits(), seed: Some(seed), samples, groups, sources: tags(source) }
}

/// Prompt used to query a suspect model; only its group label reaches the samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub content_prompt: String,
    pub special_tag: String,
    pub group_label: String,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.special_tag.trim().is_empty() {
            return Err(ChannelError::InvalidParameter("prompt special tag must be nonempty".into()));
        }
        Ok(())
    }
}

/// `per_prompt` draws for each prompt, each prompt with its own source, grouped by prompt label.
pub fn sample_prompted<S: AccuracySource>(
    prompts: &[(PromptSpec, S)],
    per_prompt: usize,
    seed: u64,
) -> Result<AccuracySampleSet, ChannelError> {
    let n_bits = prompts.first().map(|(_, s)| s.n_bits()).unwrap_or(1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = AccuracySampleSet { n_bits, seed: Some(seed), samples: Vec::new(), groups: Vec::new(), sources: Vec::new() };
    for (prompt, source) in prompts {
        prompt.validate()?;
        if source.n_bits() != n_bits {
            return Err(ChannelError::BitLengthMismatch(n_bits, source.n_bits()));
        }
        let sampler = Sampler::new(source);
        for _ in 0..per_prompt {
            out.samples.push(sampler.draw(&mut rng).0);
            out.groups.push(prompt.group_label.clone());
        }
        out.sources.extend(tags(source));
    }
    Ok(out)
}
