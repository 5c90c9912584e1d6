//! Loading a generated dataset back from disk: the manifest plus the
//! per-entry point CSVs, binned into training samples.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use contactq_core::activation::build_multires;
use contactq_core::features::{ContactClass, LabelBand};
use contactq_core::model::TrainSample;
use contactq_core::pointfile::parse_pair_csv;
use contactq_core::synthgen::Split;

use crate::formats::{DiskEntry, DiskManifest, MANIFEST_FILE};

/// Read `manifest.json` from a dataset directory.
pub fn load_manifest(dir: &Path) -> Result<DiskManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let manifest: DiskManifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing manifest {}", path.display()))?;
    if manifest.entries.is_empty() {
        bail!("manifest {} has no entries", path.display());
    }
    Ok(manifest)
}

/// Load one entry's pair file and bin it at the given resolutions.
pub fn load_sample(
    dir: &Path,
    entry: &DiskEntry,
    coarse_res: usize,
    fine_res: usize,
) -> Result<TrainSample> {
    let path: PathBuf = dir.join(&entry.points_path);
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading points {}", path.display()))?;
    let pair =
        parse_pair_csv(&text).with_context(|| format!("parsing points {}", path.display()))?;
    let input = build_multires(&pair, coarse_res, fine_res)?;
    let class = ContactClass::from_label(entry.entry.label)
        .with_context(|| format!("entry {}: invalid label {}", entry.entry.id, entry.entry.label))?;
    Ok(TrainSample {
        input,
        class,
        band: LabelBand {
            class,
            lo: entry.entry.band[0],
            hi: entry.entry.band[1],
        },
    })
}

/// Materialize the (train, validation) splits in manifest order.
pub fn load_split_samples(
    manifest: &DiskManifest,
    dir: &Path,
    coarse_res: usize,
    fine_res: usize,
) -> Result<(Vec<TrainSample>, Vec<TrainSample>)> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for entry in &manifest.entries {
        let sample = load_sample(dir, entry, coarse_res, fine_res)?;
        match entry.entry.split {
            Split::Train => train.push(sample),
            Split::Validation => val.push(sample),
        }
    }
    Ok((train, val))
}
