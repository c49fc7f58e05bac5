//! Run reports and their table and plot-data renderings.

use std::collections::BTreeMap;
use std::path::Path;

use mimicguard_core::channel::{AccuracySampleSet, SourceTag};
use mimicguard_core::verify::{histogram, summary, Binning, PowerPoint, VerificationVerdict, VerifyError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEntry {
    pub path: String,
    pub sha256: String,
}

/// Outcome for one image of a batch command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted_hex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub luma_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ruling: Option<String>,
}

/// What a `simulate` run drew from, so renderers can recompute model curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSource {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean: Option<String>,
    #[serde(default)]
    pub two_stage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub command: Vec<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub inputs: Vec<InputEntry>,
    #[serde(default)]
    pub results: Vec<ImageResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<AccuracySampleSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSource>,
    #[serde(default)]
    pub verdicts: BTreeMap<String, VerificationVerdict>,
    /// Provenance of every channel model that produced evidence in this run.
    #[serde(default)]
    pub provenance: Vec<SourceTag>,
    #[serde(default)]
    pub canonical_hash: String,
    /// Wall-clock time; excluded from the canonical hash.
    #[serde(default)]
    pub generated_at: String,
}

impl RunReport {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            command,
            seeds: Vec::new(),
            inputs: Vec::new(),
            results: Vec::new(),
            samples: None,
            simulation: None,
            verdicts: BTreeMap::new(),
            provenance: Vec::new(),
            canonical_hash: String::new(),
            generated_at: String::new(),
        }
    }

    /// SHA-256 of the report serialized without its hash and timestamp.
    pub fn compute_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.canonical_hash.clear();
        canonical.generated_at.clear();
        let bytes = serde_json::to_vec(&canonical).expect("report serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Stamps the hash and the timestamp. `SOURCE_DATE_EPOCH` pins the timestamp.
    pub fn finalize(mut self) -> Self {
        self.canonical_hash = self.compute_hash();
        self.generated_at = timestamp();
        self
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        std::fs::write(path, text)
    }
}

pub fn timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Any file `report --run` understands.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RunInput {
    Run(Box<RunReport>),
    Verdict(Box<VerificationVerdict>),
    Verdicts(BTreeMap<String, VerificationVerdict>),
    Samples(AccuracySampleSet),
}

/// One table row: bin counts plus average and best correct bits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub label: String,
    pub counts: Vec<u64>,
    pub avg_bits: f64,
    pub best_bits: u32,
}

fn row_from_samples(label: &str, s: &AccuracySampleSet, binning: Binning) -> Result<TableRow, VerifyError> {
    let sm = summary(s)?;
    Ok(TableRow { label: label.to_string(), counts: histogram(s, binning)?, avg_bits: sm.avg_bits, best_bits: sm.best_bits })
}

fn row_from_verdict(label: &str, v: &VerificationVerdict, binning: Binning) -> TableRow {
    let counts = match binning {
        Binning::Five => v.histogram_5bin.clone(),
        Binning::Ten => v.histogram_10bin.clone(),
    };
    TableRow { label: label.to_string(), counts, avg_bits: v.avg_bits, best_bits: v.best_bits }
}

fn sample_label(s: &AccuracySampleSet) -> String {
    let labels: Vec<&str> = s.sources.iter().map(|t| t.label.as_str()).collect();
    if labels.is_empty() { "samples".to_string() } else { labels.join("+") }
}

pub fn table_rows(input: &RunInput, binning: Binning) -> Result<Vec<TableRow>, VerifyError> {
    Ok(match input {
        RunInput::Run(r) => {
            let mut rows = Vec::new();
            if let Some(s) = &r.samples {
                rows.push(row_from_samples(&sample_label(s), s, binning)?);
            }
            rows.extend(r.verdicts.iter().map(|(k, v)| row_from_verdict(k, v, binning)));
            rows
        }
        RunInput::Verdict(v) => vec![row_from_verdict("verdict", v, binning)],
        RunInput::Verdicts(m) => m.iter().map(|(k, v)| row_from_verdict(k, v, binning)).collect(),
        RunInput::Samples(s) => vec![row_from_samples(&sample_label(s), s, binning)?],
    })
}

/// Bin labels such as `40-60%`.
pub fn bin_labels(binning: Binning) -> Vec<String> {
    let b = binning.bins();
    let w = 100 / b;
    (0..b).map(|i| format!("{}-{}%", i * w, (i + 1) * w)).collect()
}

/// CSV with the five- or ten-bin table column order: row, bins..., avg(bits), best(bits).
pub fn render_csv(rows: &[TableRow], binning: Binning) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row".to_string()];
    header.extend(bin_labels(binning));
    header.extend(["avg(bits)".to_string(), "best(bits)".to_string()]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.label.clone()];
        rec.extend(r.counts.iter().map(u64::to_string));
        rec.push(format!("{:.2}", r.avg_bits));
        rec.push(r.best_bits.to_string());
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramSeries {
    pub label: String,
    pub bins: Vec<String>,
    pub counts: Vec<u64>,
    pub avg_bits: f64,
    pub best_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotData {
    pub binning: Binning,
    pub histograms: Vec<HistogramSeries>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_curve: Option<Vec<PowerPoint>>,
}

pub fn plot_data(rows: Vec<TableRow>, binning: Binning, power_curve: Option<Vec<PowerPoint>>) -> PlotData {
    let bins = bin_labels(binning);
    PlotData {
        binning,
        histograms: rows
            .into_iter()
            .map(|r| HistogramSeries { label: r.label, bins: bins.clone(), counts: r.counts, avg_bits: r.avg_bits, best_bits: r.best_bits })
            .collect(),
        power_curve,
    }
}
