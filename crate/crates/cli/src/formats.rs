//! On-disk report shapes. JSON structs mirror what the commands
//! compute, extended with provenance: the resolved config and a
//! SHA-256 of the weights file the numbers came from.

use contactq_core::contact::CandidatePair;
use contactq_core::model::{EpochStats, EvalReport, NetConfig, ScoreReport};
use contactq_core::synthgen::ManifestEntry;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const POINTS_DIR: &str = "points";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const HISTORY_FILE: &str = "history.csv";

/// Manifest entry plus the location of its materialized point file,
/// relative to the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiskEntry {
    #[serde(flatten)]
    pub entry: ManifestEntry,
    pub points_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiskManifest {
    pub seed: u64,
    pub train_fraction: f64,
    pub augmentations: usize,
    pub entries: Vec<DiskEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreFile {
    pub points_path: String,
    pub weights_sha256: String,
    pub config: NetConfig,
    #[serde(flatten)]
    pub report: ScoreReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectFile {
    pub points_path: String,
    pub fraction: f64,
    pub body_diagonal: f64,
    pub tolerance: f64,
    pub pairs: Vec<CandidatePair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalFile {
    pub data_dir: String,
    pub split: String,
    pub weights_sha256: String,
    pub config: NetConfig,
    #[serde(flatten)]
    pub report: EvalReport,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy,lr\n");
    for h in history {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            h.epoch, h.train_loss, h.train_accuracy, h.val_loss, h.val_accuracy, h.lr
        ));
    }
    out
}

/// Sweep output: the varied parameter, the three class probabilities
/// and the folded score, one row per step.
pub fn sweep_csv(rows: &[(f64, [f64; 3], f64)]) -> String {
    let mut out = String::from("parameter,p1,p2,p3,c\n");
    for (param, p, c) in rows {
        out.push_str(&format!("{},{},{},{},{}\n", param, p[0], p[1], p[2], c));
    }
    out
}

/// JSON text as written to disk: pretty, trailing newline.
pub fn to_json_text<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}
