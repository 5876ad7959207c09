//! JSON-lines manifest of a mixing run.
//!
//! The first line is a [`ManifestHeader`]; every following line is one
//! [`ManifestEntry`], ordered by pair index and then direction (source first).
//! Nothing time-dependent is recorded, so identical runs give identical files.
//!
//! ```text
//! {"kind":"header","format":"bdm-manifest","version":1,"config_hash":"9f2c…","config":{…},…}
//! {"kind":"sample","pair_index":0,"direction":"S","sample_id":"s003",…,"provenance":[…]}
//! {"kind":"sample","pair_index":0,"direction":"T","sample_id":"t011",…,"provenance":[…]}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bank::Domain;
use crate::cut::CutPlan;
use crate::error::{BdmError, Result};
use crate::mix::{MixedSample, PasteRecord};
use crate::persist::sha256_hex;
use crate::types::MixConfig;

pub const MANIFEST_FORMAT: &str = "bdm-manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Hex sha256 of the config's compact JSON form.
pub fn config_hash(config: &MixConfig) -> String {
    let json = serde_json::to_vec(config).expect("MixConfig serializes");
    sha256_hex(&json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub config: MixConfig,
    pub pair_count: u64,
    pub source_dir: String,
    pub target_dir: String,
    /// sha256 of each bank's index document.
    pub source_bank_sha256: String,
    pub target_bank_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pair_index: u64,
    /// `S` for the mixed source image, `T` for the mixed target image.
    pub direction: String,
    pub sample_id: String,
    pub partner_id: String,
    pub pair_seed: u64,
    /// Output paths relative to the run directory.
    pub image: String,
    pub label: String,
    pub cut_plan: CutPlan,
    pub provenance: Vec<PasteRecord>,
}

impl ManifestEntry {
    pub fn domain(&self) -> Result<Domain> {
        match self.direction.as_str() {
            "S" => Ok(Domain::Source),
            "T" => Ok(Domain::Target),
            other => Err(BdmError::data(format!("unknown direction {other:?}"))),
        }
    }

    pub fn from_mixed(
        pair_index: u64,
        pair_seed: u64,
        partner_id: &str,
        mixed: &MixedSample,
        image: String,
        label: String,
    ) -> Self {
        Self {
            pair_index,
            direction: mixed.domain.tag().to_string(),
            sample_id: mixed.sample_id.clone(),
            partner_id: partner_id.to_string(),
            pair_seed,
            image,
            label,
            cut_plan: mixed.cut_plan.clone(),
            provenance: mixed.provenance.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Header(ManifestHeader),
    Sample(ManifestEntry),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

fn line_bytes(line: &Line) -> Vec<u8> {
    let mut bytes = serde_json::to_vec(line).expect("manifest lines serialize");
    bytes.push(b'\n');
    bytes
}

pub fn write_manifest<W: Write>(
    mut out: W,
    header: &ManifestHeader,
    entries: &[ManifestEntry],
) -> std::io::Result<()> {
    out.write_all(&line_bytes(&Line::Header(header.clone())))?;
    for e in entries {
        out.write_all(&line_bytes(&Line::Sample(e.clone())))?;
    }
    out.flush()
}

/// Reads a manifest. A file with no lines at all yields `Ok(None)`.
pub fn read_manifest(path: &Path) -> Result<Option<Manifest>> {
    let file = std::fs::File::open(path).map_err(|e| BdmError::io(path, e))?;
    let mut header = None;
    let mut entries = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| BdmError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line)
            .map_err(|e| BdmError::data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        match (parsed, &header) {
            (Line::Header(h), None) => {
                if h.format != MANIFEST_FORMAT || h.version != MANIFEST_VERSION {
                    return Err(BdmError::data(format!(
                        "{}: unsupported manifest {} v{}",
                        path.display(),
                        h.format,
                        h.version
                    )));
                }
                header = Some(h);
            }
            (Line::Header(_), Some(_)) => {
                return Err(BdmError::data(format!(
                    "{}:{}: second header line",
                    path.display(),
                    n + 1
                )))
            }
            (Line::Sample(_), None) => {
                return Err(BdmError::data(format!(
                    "{}: sample line before header",
                    path.display()
                )))
            }
            (Line::Sample(e), Some(_)) => entries.push(e),
        }
    }
    Ok(header.map(|header| Manifest { header, entries }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> ManifestHeader {
        let config = MixConfig::default();
        ManifestHeader {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            config_hash: config_hash(&config),
            config,
            pair_count: 1,
            source_dir: "src".into(),
            target_dir: "tgt".into(),
            source_bank_sha256: "00".into(),
            target_bank_sha256: "11".into(),
        }
    }

    #[test]
    fn roundtrip_and_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let entry = ManifestEntry {
            pair_index: 0,
            direction: "S".into(),
            sample_id: "a".into(),
            partner_id: "b".into(),
            pair_seed: 5,
            image: "images/x.png".into(),
            label: "labels/x.png".into(),
            cut_plan: CutPlan::empty(),
            provenance: vec![],
        };
        let mut buf = Vec::new();
        write_manifest(&mut buf, &header(), std::slice::from_ref(&entry)).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let m = read_manifest(&path).unwrap().unwrap();
        assert_eq!(m.header, header());
        assert_eq!(m.entries, vec![entry]);
        assert!(buf.starts_with(b"{\"kind\":\"header\""));

        std::fs::write(&path, b"").unwrap();
        assert_eq!(read_manifest(&path).unwrap(), None);
    }

    #[test]
    fn config_hash_tracks_every_field() {
        let a = MixConfig::default();
        let b = MixConfig {
            gamma: 0.25,
            ..MixConfig::default()
        };
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
