use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{fit_channel, BinStrata, ChannelError, ChannelModel, Provenance};
use crate::stats;

pub(super) const TABLE_BITS: usize = 32;
/// Mean shrinkage of a second fine-tuning round (19.02 / 19.96 bits).
pub(super) const TWO_STAGE_RATIO: f64 = 19.02 / 19.96;

const CATALOG_JSON: &str = include_str!("presets.json");

/// One catalog row: the source measurement and the frozen kernel fitted to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetEntry {
    pub id: String,
    pub source: String,
    pub row: String,
    pub n_bits: usize,
    /// Counts over equal-width accuracy bins (5 or 10), when the source has them.
    pub bins: Option<Vec<u64>>,
    pub avg: f64,
    pub best: Option<u32>,
    pub alpha: f64,
    pub beta: f64,
    pub provenance: Provenance,
}

impl PresetEntry {
    pub fn model(&self) -> Result<ChannelModel, ChannelError> {
        let model = ChannelModel::beta_binomial(self.n_bits, self.alpha, self.beta, self.id.clone(), self.provenance)?;
        match &self.bins {
            Some(bins) => model.with_strata(BinStrata::from_counts(bins)?),
            None => Ok(model),
        }
    }
}

/// A measured row: accuracy-bin counts (when reported), average and best correct bits.
pub struct SourceRow {
    pub id: &'static str,
    pub source: &'static str,
    pub row: &'static str,
    pub bins: Option<&'static [u64]>,
    pub avg: f64,
    pub best: Option<u32>,
}

const fn row(
    id: &'static str,
    source: &'static str,
    row: &'static str,
    bins: Option<&'static [u64]>,
    avg: f64,
    best: Option<u32>,
) -> SourceRow {
    SourceRow { id, source, row, bins, avg, best }
}

pub const SOURCE_ROWS: &[SourceRow] = &[
    row("t1-artist-clean", "table-1", "artist artworks, clean", Some(&[0, 255, 741, 4, 0]), 14.03, Some(21)),
    row("t1-artist-watermarked", "table-1", "artist artworks, watermarked", Some(&[0, 0, 109, 867, 24]), 19.54, Some(29)),
    row("t1-ai-clean", "table-1", "AI artworks, clean", Some(&[0, 163, 826, 11, 0]), 14.66, Some(20)),
    row("t1-ai-watermarked", "table-1", "AI artworks, watermarked", Some(&[0, 0, 193, 797, 10]), 19.07, Some(28)),
    row("t1-natural-clean", "table-1", "natural images, clean", Some(&[0, 176, 805, 10, 0]), 14.47, Some(21)),
    row("t1-natural-watermarked", "table-1", "natural images, watermarked", Some(&[0, 0, 520, 468, 12]), 19.31, Some(28)),
    row("t2-no-watermark", "table-2", "no watermark", Some(&[0, 86, 908, 6, 0]), 15.18, Some(21)),
    row("t2-dwt-dct", "table-2", "DWT-DCT", Some(&[0, 43, 502, 439, 16]), 17.41, Some(26)),
    row("t2-dwt-dct-svd", "table-2", "DWT-DCT-SVD", Some(&[0, 37, 482, 454, 27]), 18.57, Some(30)),
    row("t2-ssl", "table-2", "SSL", Some(&[0, 0, 237, 748, 15]), 19.29, Some(27)),
    row("t2-rivagan", "table-2", "RivaGAN", Some(&[0, 0, 111, 840, 49]), 19.72, Some(29)),
    row("t3-unwatermarked", "table-3", "unwatermarked", Some(&[0, 0, 2, 194, 532, 232, 40, 0, 0, 0]), 15.25, Some(21)),
    row("t3-normal-finetune", "table-3", "normal fine-tune", Some(&[0, 0, 0, 0, 0, 261, 640, 81, 13, 5]), 19.96, Some(29)),
    row("t3-two-stage-finetune", "table-3", "two-stage fine-tune", Some(&[0, 0, 0, 11, 125, 245, 571, 44, 4, 0]), 19.02, Some(26)),
    row("t3-gaussian-blur", "table-3", "Gaussian blur", Some(&[2, 0, 2, 30, 119, 211, 558, 67, 11, 0]), 19.25, Some(28)),
    row("t3-brightness", "table-3", "brightness", Some(&[0, 0, 2, 33, 189, 294, 450, 30, 2, 0]), 18.24, Some(26)),
    row("t3-center-crop", "table-3", "center crop", Some(&[0, 0, 1, 49, 246, 279, 411, 14, 0, 0]), 17.76, Some(24)),
    row("t3-contrast", "table-3", "contrast", Some(&[0, 0, 2, 55, 229, 266, 401, 44, 3, 0]), 18.06, Some(26)),
    row("t3-hue", "table-3", "hue", Some(&[0, 0, 0, 29, 226, 346, 372, 27, 0, 0]), 17.92, Some(25)),
    row("t3-jpeg", "table-3", "JPEG compression", Some(&[0, 0, 0, 12, 171, 316, 473, 28, 0, 0]), 18.45, Some(25)),
    row("t3-meme", "table-3", "meme format", Some(&[1, 0, 12, 115, 315, 263, 275, 18, 1, 0]), 16.86, Some(26)),
    row("t3-resize", "table-3", "resize", Some(&[0, 0, 0, 11, 148, 269, 488, 78, 6, 0]), 19.08, Some(27)),
    row("t3-rotation", "table-3", "rotation", Some(&[0, 0, 0, 26, 165, 311, 460, 35, 3, 0]), 18.85, Some(27)),
    row("t4-remove-painting", "table-4", "remove 'painting'", None, 17.90, Some(24)),
    row("t4-enrich-caption", "table-4", "enrich caption", None, 18.10, Some(25)),
    row("t4-revise-grammar", "table-4", "revise grammar", None, 19.12, Some(26)),
    row("t4-synonyms", "table-4", "synonyms", None, 19.22, Some(26)),
    row("t4-minor-edits", "table-4", "minor edits", None, 19.32, Some(26)),
    row("t4-remove-adjectives", "table-4", "remove adjectives", None, 19.35, Some(26)),
    row("t4-scramble-order", "table-4", "scramble order", None, 19.42, Some(27)),
    row("t4-single-subject", "table-4", "single subject", None, 20.28, Some(27)),
    row("t4-simplify", "table-4", "simplify", None, 20.29, Some(27)),
    row("t4-strange-characters", "table-4", "strange characters", None, 21.06, Some(27)),
    row("s54-mixed-watermarked", "mixed-fine-tune", "watermarked component for small watermarked shares", None, 19.54, None),
];

/// Mixed-share preset: at a 10% watermarked share, the maximum of 1000 draws
/// should reach [`MIXED_TAIL_BITS`] with probability [`MIXED_TAIL_CONFIDENCE`].
pub const MIXED_SHARE: f64 = 0.1;
pub const MIXED_DRAWS: usize = 1000;
pub const MIXED_TAIL_BITS: usize = 27;
pub const MIXED_TAIL_CONFIDENCE: f64 = 0.99;

/// Per-draw tail mass of the watermarked component needed for the mixed preset.
pub fn mixed_tail_target() -> f64 {
    (1.0 - (1.0 - MIXED_TAIL_CONFIDENCE).powf(1.0 / MIXED_DRAWS as f64)) / MIXED_SHARE
}

/// Concentration of a pure beta-binomial with mean `mean_bits` whose `P(K >= k)` is `tail`.
fn concentration_for_tail(n: usize, mean_bits: f64, k: usize, tail: f64) -> Result<f64, ChannelError> {
    let pi = mean_bits / n as f64;
    let tail_at = |s: f64| stats::upper_tail(&stats::beta_binomial_pmf(n, pi * s, (1.0 - pi) * s), k);
    // tail shrinks as the kernel sharpens toward the binomial
    let (mut lo, mut hi) = (0.0f64, 8.0f64);
    if !(tail_at(10f64.powf(hi)) < tail && tail < tail_at(10f64.powf(lo))) {
        return Err(ChannelError::InvalidParameter(format!("tail {tail} unreachable at mean {mean_bits}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail_at(10f64.powf(mid)) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(10f64.powf(0.5 * (lo + hi)))
}

/// Recompute the catalog from [`SOURCE_ROWS`]. Binned rows are fitted and
/// stratified on their counts with the quoted average; rows without bins use
/// the normal fine-tune kernel concentration at their quoted average.
pub fn build_catalog() -> Result<Vec<PresetEntry>, ChannelError> {
    let mut out: Vec<PresetEntry> = Vec::with_capacity(SOURCE_ROWS.len());
    let mut reference_concentration = None;
    for r in SOURCE_ROWS {
        let (model, provenance) = match (r.bins, r.id) {
            (Some(bins), _) => (fit_channel(bins, TABLE_BITS, Some(r.avg))?, Provenance::PaperTable),
            (None, "s54-mixed-watermarked") => {
                let s = concentration_for_tail(TABLE_BITS, r.avg, MIXED_TAIL_BITS, mixed_tail_target())?;
                (ChannelModel::from_mean_concentration(TABLE_BITS, r.avg / TABLE_BITS as f64, s, r.id, Provenance::Fitted)?, Provenance::Fitted)
            }
            (None, _) => {
                let s = reference_concentration
                    .ok_or_else(|| ChannelError::InvalidParameter("normal fine-tune row must precede unbinned rows".into()))?;
                (ChannelModel::from_mean_concentration(TABLE_BITS, r.avg / TABLE_BITS as f64, s, r.id, Provenance::Fitted)?, Provenance::Fitted)
            }
        };
        if r.id == "t3-normal-finetune" {
            reference_concentration = Some(model.concentration());
        }
        out.push(PresetEntry {
            id: r.id.to_string(),
            source: r.source.to_string(),
            row: r.row.to_string(),
            n_bits: TABLE_BITS,
            bins: r.bins.map(<[u64]>::to_vec),
            avg: r.avg,
            best: r.best,
            alpha: model.alpha,
            beta: model.beta,
            provenance,
        });
    }
    Ok(out)
}

/// Serialize a catalog in the shipped layout.
pub fn catalog_json(entries: &[PresetEntry]) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        presets: &'a [PresetEntry],
    }
    serde_json::to_string_pretty(&Out { presets: entries }).expect("catalog serializes") + "\n"
}

#[derive(Deserialize)]
struct Catalog {
    presets: Vec<PresetEntry>,
}

/// The shipped preset catalog.
pub fn preset_catalog() -> &'static [PresetEntry] {
    static CATALOG: OnceLock<Vec<PresetEntry>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        serde_json::from_str::<Catalog>(CATALOG_JSON).expect("embedded preset catalog is valid JSON").presets
    })
}

/// Preset identifiers in catalog order.
pub const PRESET_IDS: &[&str] = &[
    "t1-artist-clean",
    "t1-artist-watermarked",
    "t1-ai-clean",
    "t1-ai-watermarked",
    "t1-natural-clean",
    "t1-natural-watermarked",
    "t2-no-watermark",
    "t2-dwt-dct",
    "t2-dwt-dct-svd",
    "t2-ssl",
    "t2-rivagan",
    "t3-unwatermarked",
    "t3-normal-finetune",
    "t3-two-stage-finetune",
    "t3-gaussian-blur",
    "t3-brightness",
    "t3-center-crop",
    "t3-contrast",
    "t3-hue",
    "t3-jpeg",
    "t3-meme",
    "t3-resize",
    "t3-rotation",
    "t4-remove-painting",
    "t4-enrich-caption",
    "t4-revise-grammar",
    "t4-synonyms",
    "t4-minor-edits",
    "t4-remove-adjectives",
    "t4-scramble-order",
    "t4-single-subject",
    "t4-simplify",
    "t4-strange-characters",
    "s54-mixed-watermarked",
];

pub fn preset(name: &str) -> Result<ChannelModel, ChannelError> {
    preset_catalog()
        .iter()
        .find(|e| e.id == name)
        .ok_or_else(|| ChannelError::UnknownPreset(name.to_string()))?
        .model()
}

pub(super) fn two_stage_bins() -> Vec<u64> {
    preset_catalog()
        .iter()
        .find(|e| e.id == "t3-two-stage-finetune")
        .and_then(|e| e.bins.clone())
        .expect("catalog carries the two-stage row")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_ids_match_list() {
        let ids: Vec<&str> = preset_catalog().iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, PRESET_IDS);
        for id in PRESET_IDS {
            let m = preset(id).unwrap();
            assert_eq!(m.label, *id);
            assert_eq!(m.n_bits, TABLE_BITS);
        }
    }

    #[test]
    fn unknown_preset() {
        assert_eq!(preset("t9-nothing"), Err(ChannelError::UnknownPreset("t9-nothing".into())));
    }

    #[test]
    fn table_rows_carry_table_provenance() {
        for e in preset_catalog() {
            let expected = if e.bins.is_some() { Provenance::PaperTable } else { Provenance::Fitted };
            assert_eq!(e.provenance, expected, "{}", e.id);
        }
    }

    #[test]
    fn preset_means_equal_quoted_averages() {
        for e in preset_catalog() {
            let m = e.model().unwrap();
            assert!((m.mean_bits() - e.avg).abs() < 1e-6, "{}: {} vs {}", e.id, m.mean_bits(), e.avg);
        }
    }

    #[test]
    fn shipped_catalog_is_fresh() {
        let rebuilt = build_catalog().unwrap();
        let shipped = preset_catalog();
        assert_eq!(rebuilt.len(), shipped.len());
        for (a, b) in rebuilt.iter().zip(shipped) {
            assert_eq!((&a.id, &a.bins, a.avg, a.best, a.provenance), (&b.id, &b.bins, b.avg, b.best, b.provenance));
            assert!((a.alpha - b.alpha).abs() <= 1e-9 * a.alpha.max(1.0), "{}: alpha {} vs {}", a.id, a.alpha, b.alpha);
            assert!((a.beta - b.beta).abs() <= 1e-9 * a.beta.max(1.0), "{}: beta {} vs {}", a.id, a.beta, b.beta);
        }
    }

    #[test]
    fn mixed_preset_meets_its_tail() {
        let m = preset("s54-mixed-watermarked").unwrap();
        let tail = stats::upper_tail(&m.pmf(), MIXED_TAIL_BITS);
        assert!((tail / mixed_tail_target() - 1.0).abs() < 1e-6);
        // max of 1000 draws from the mixture with an unwatermarked component
        let clean = stats::upper_tail(&preset("t1-artist-clean").unwrap().pmf(), MIXED_TAIL_BITS);
        let per_draw = MIXED_SHARE * tail + (1.0 - MIXED_SHARE) * clean;
        let p_max = 1.0 - (1.0 - per_draw).powi(MIXED_DRAWS as i32);
        assert!(p_max >= MIXED_TAIL_CONFIDENCE - 1e-9, "{p_max}");
    }
}
