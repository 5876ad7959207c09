//! On-disk documents for stats, spatial priors and patch banks.
//!
//! Every JSON document carries `format` and `version` fields; loaders reject
//! anything else. Layouts:
//!
//! ```text
//! stats.json                 ClassStats plus header
//! prior.json + prior.bin     raster metadata; blob of K*res*res little-endian f64
//! bank/bank.json             grid, K, R, patch table, sequence table
//! bank/crops/ab/<sha256>.png content-addressed image and label crops
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bank::{CropSource, Domain, PatchBank, PatchEntry, PatchId};
use crate::error::{BdmError, Result};
use crate::io::{
    decode_image_png, decode_label_png, encode_image_png, encode_label_png, read_bytes, write_bytes,
};
use crate::mix::BankView;
use crate::stats::{ClassStats, SpatialPrior};
use crate::types::{GridSpec, Image, LabelMap};

pub const STATS_FORMAT: &str = "bdm-stats";
pub const PRIOR_FORMAT: &str = "bdm-prior";
pub const BANK_FORMAT: &str = "bdm-bank";
pub const FORMAT_VERSION: u32 = 1;
pub const BANK_INDEX: &str = "bank.json";
pub const CROPS_DIR: &str = "crops";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| BdmError::Invariant(format!("serialization failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn from_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| BdmError::data(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

fn check_header(path: &Path, expected: &str) -> Result<()> {
    let h: Header = from_json(path)?;
    if h.format != expected {
        return Err(BdmError::data(format!(
            "{}: expected a {expected} document, found {}",
            path.display(),
            h.format
        )));
    }
    if h.version != FORMAT_VERSION {
        return Err(BdmError::data(format!(
            "{}: unsupported {expected} version {}",
            path.display(),
            h.version
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StatsDoc {
    format: String,
    version: u32,
    #[serde(flatten)]
    stats: ClassStats,
}

pub fn save_stats(path: &Path, stats: &ClassStats) -> Result<()> {
    let doc = StatsDoc {
        format: STATS_FORMAT.into(),
        version: FORMAT_VERSION,
        stats: stats.clone(),
    };
    write_bytes(path, &to_json(&doc)?)
}

pub fn load_stats(path: &Path) -> Result<ClassStats> {
    check_header(path, STATS_FORMAT)?;
    let doc: StatsDoc = from_json(path)?;
    let s = doc.stats;
    if s.pixel_counts.len() != s.num_classes || s.difficulty.len() != s.num_classes {
        return Err(BdmError::data(format!(
            "{}: per-class arrays do not match num_classes {}",
            path.display(),
            s.num_classes
        )));
    }
    Ok(s)
}

#[derive(Serialize, Deserialize)]
struct PriorDoc {
    format: String,
    version: u32,
    num_classes: usize,
    resolution: usize,
    bandwidth: f64,
    empty: Vec<bool>,
    blob: String,
    blob_sha256: String,
}

/// Blob path paired with a prior document: same stem, `.bin` extension.
pub fn prior_blob_path(path: &Path) -> PathBuf {
    path.with_extension("bin")
}

pub fn save_prior(path: &Path, prior: &SpatialPrior) -> Result<()> {
    let blob: Vec<u8> = prior.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let blob_path = prior_blob_path(path);
    let doc = PriorDoc {
        format: PRIOR_FORMAT.into(),
        version: FORMAT_VERSION,
        num_classes: prior.num_classes,
        resolution: prior.resolution,
        bandwidth: prior.bandwidth,
        empty: prior.empty.clone(),
        blob: blob_path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("prior.bin")
            .to_string(),
        blob_sha256: sha256_hex(&blob),
    };
    write_bytes(&blob_path, &blob)?;
    write_bytes(path, &to_json(&doc)?)
}

pub fn load_prior(path: &Path) -> Result<SpatialPrior> {
    check_header(path, PRIOR_FORMAT)?;
    let doc: PriorDoc = from_json(path)?;
    let blob_path = path.with_file_name(&doc.blob);
    let blob = read_bytes(&blob_path)?;
    if sha256_hex(&blob) != doc.blob_sha256 {
        return Err(BdmError::data(format!(
            "{}: checksum does not match its document",
            blob_path.display()
        )));
    }
    let expected = doc.num_classes * doc.resolution * doc.resolution;
    if blob.len() != expected * 8 || doc.empty.len() != doc.num_classes {
        return Err(BdmError::data(format!(
            "{}: size does not match {} classes at {}x{}",
            blob_path.display(),
            doc.num_classes,
            doc.resolution,
            doc.resolution
        )));
    }
    let values = blob
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    Ok(SpatialPrior {
        num_classes: doc.num_classes,
        resolution: doc.resolution,
        bandwidth: doc.bandwidth,
        values,
        empty: doc.empty,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredPatch {
    #[serde(flatten)]
    entry: PatchEntry,
    image: String,
    label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredSequence {
    cell: usize,
    class: usize,
    group: usize,
    patches: Vec<PatchId>,
}

#[derive(Serialize, Deserialize)]
struct BankDoc {
    format: String,
    version: u32,
    domain: Domain,
    grid: GridSpec,
    image_size: (u32, u32),
    num_classes: usize,
    conf_groups: usize,
    patches: Vec<StoredPatch>,
    /// Non-empty sequences only; the rest are empty.
    sequences: Vec<StoredSequence>,
}

fn crop_rel_path(hash: &str) -> PathBuf {
    PathBuf::from(CROPS_DIR)
        .join(&hash[..2])
        .join(format!("{hash}.png"))
}

fn store_crop(root: &Path, bytes: &[u8]) -> Result<String> {
    let hash = sha256_hex(bytes);
    let path = root.join(crop_rel_path(&hash));
    if !path.exists() {
        write_bytes(&path, bytes)?;
    }
    Ok(hash)
}

/// Writes a bank index and its crops under `dir`.
pub fn save_bank(dir: &Path, bank: &PatchBank, crops: &dyn CropSource) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BdmError::io(dir, e))?;
    let encoded: Vec<(Vec<u8>, Vec<u8>)> = (0..bank.patches().len() as PatchId)
        .into_par_iter()
        .map(|id| {
            let (img, lab) = crops.crop(bank, id)?;
            Ok((encode_image_png(&img)?, encode_label_png(&lab)?))
        })
        .collect::<Result<_>>()?;
    let mut patches = Vec::with_capacity(encoded.len());
    for (entry, (img, lab)) in bank.patches().iter().zip(encoded) {
        patches.push(StoredPatch {
            entry: entry.clone(),
            image: store_crop(dir, &img)?,
            label: store_crop(dir, &lab)?,
        });
    }
    let mut sequences = Vec::new();
    for key in bank.non_empty_keys() {
        sequences.push(StoredSequence {
            cell: key.cell,
            class: key.class,
            group: key.group,
            patches: bank.query(key.cell, key.class, key.group)?.to_vec(),
        });
    }
    let doc = BankDoc {
        format: BANK_FORMAT.into(),
        version: FORMAT_VERSION,
        domain: bank.domain,
        grid: bank.grid,
        image_size: bank.image_size,
        num_classes: bank.num_classes,
        conf_groups: bank.conf_groups,
        patches,
        sequences,
    };
    write_bytes(&dir.join(BANK_INDEX), &to_json(&doc)?)
}

/// Crops stored in a bank directory.
#[derive(Debug, Clone)]
pub struct DiskCrops {
    root: PathBuf,
    files: Vec<(String, String)>,
}

impl CropSource for DiskCrops {
    fn crop(&self, _bank: &PatchBank, id: PatchId) -> Result<(Image, LabelMap)> {
        let (img, lab) = self
            .files
            .get(id as usize)
            .ok_or_else(|| BdmError::OutOfRange(format!("patch {id} not in bank")))?;
        let read = |hash: &str| {
            let path = self.root.join(crop_rel_path(hash));
            let bytes = read_bytes(&path)?;
            if sha256_hex(&bytes) != hash {
                return Err(BdmError::data(format!(
                    "{}: content does not match its address",
                    path.display()
                )));
            }
            Ok(bytes)
        };
        Ok((
            decode_image_png(&read(img)?)?,
            decode_label_png(&read(lab)?)?,
        ))
    }
}

/// A bank read from disk together with its crop store.
#[derive(Debug, Clone)]
pub struct LoadedBank {
    pub bank: PatchBank,
    pub crops: DiskCrops,
}

impl LoadedBank {
    pub fn view(&self) -> BankView<'_> {
        BankView::new(&self.bank, &self.crops)
    }
}

/// Loads a bank directory. The sequence table is checked against one rebuilt
/// from the patch table, so a tampered index is rejected.
pub fn load_bank(dir: &Path) -> Result<LoadedBank> {
    let index = dir.join(BANK_INDEX);
    check_header(&index, BANK_FORMAT)?;
    let doc: BankDoc = from_json(&index)?;
    let files = doc
        .patches
        .iter()
        .map(|p| (p.image.clone(), p.label.clone()))
        .collect();
    if doc
        .patches
        .iter()
        .any(|p| !is_hash(&p.image) || !is_hash(&p.label))
    {
        return Err(BdmError::data(format!(
            "{}: malformed crop address",
            index.display()
        )));
    }
    let bank = PatchBank::from_entries(
        doc.domain,
        doc.grid,
        doc.image_size,
        doc.num_classes,
        doc.conf_groups,
        doc.patches.into_iter().map(|p| p.entry).collect(),
    )?;
    let rebuilt: Vec<StoredSequence> = bank
        .non_empty_keys()
        .into_iter()
        .map(|k| StoredSequence {
            cell: k.cell,
            class: k.class,
            group: k.group,
            patches: bank
                .query(k.cell, k.class, k.group)
                .expect("key from bank")
                .to_vec(),
        })
        .collect();
    if rebuilt != doc.sequences {
        return Err(BdmError::data(format!(
            "{}: sequence table disagrees with patch table",
            index.display()
        )));
    }
    Ok(LoadedBank {
        bank,
        crops: DiskCrops {
            root: dir.to_path_buf(),
            files,
        },
    })
}

fn is_hash(s: &str) -> bool {
    s.len() == 64
        && s.bytes()
            .all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}
