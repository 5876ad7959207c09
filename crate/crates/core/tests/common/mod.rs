#![allow(dead_code)]

use std::path::{Path, PathBuf};

use bdm::bank::Domain;
use bdm::commands::{cmd_build_bank, cmd_prior, cmd_stats, BuildBankArgs};
use bdm::config::{DataPaths, RunConfig};
use bdm::io::write_sample;
use bdm::synth::{block_dataset, BlockSpec};
use bdm::types::MixConfig;

/// Datasets, stats, prior and banks for one source/target pair on disk.
pub struct Fixture {
    pub root: tempfile::TempDir,
    pub num_classes: usize,
}

impl Fixture {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.path().join(rel)
    }

    pub fn run_config(&self, out: &str) -> RunConfig {
        RunConfig {
            mix: MixConfig {
                num_classes: self.num_classes,
                seed: 17,
                ..MixConfig::default()
            },
            paths: DataPaths {
                source_dir: Some(self.path("source")),
                target_dir: Some(self.path("target")),
                source_bank: Some(self.path("bank_s")),
                target_bank: Some(self.path("bank_t")),
                stats: Some(self.path("stats_s.json")),
                prior: Some(self.path("prior.json")),
                out_dir: Some(self.path(out)),
            },
        }
    }
}

pub fn write_dataset(dir: &Path, prefix: &str, n: usize, spec: &BlockSpec, seed: u64) {
    for s in block_dataset(prefix, n, spec, seed).unwrap() {
        write_sample(dir, &s).unwrap();
    }
}

/// Builds every artifact through the library command functions.
pub fn fixture(shares: Vec<f64>, n: usize) -> Fixture {
    let root = tempfile::tempdir().unwrap();
    let k = shares.len();
    let spec = BlockSpec::new(32, 24, 4, shares).with_ignore(3, 10);
    write_dataset(&root.path().join("source"), "s", n, &spec, 1);
    write_dataset(&root.path().join("target"), "t", n, &spec, 2);
    let f = Fixture {
        root,
        num_classes: k,
    };
    cmd_stats(&f.path("source"), k, &f.path("stats_s.json")).unwrap();
    cmd_stats(&f.path("target"), k, &f.path("stats_t.json")).unwrap();
    cmd_prior(&f.path("source"), k, 0.1, &f.path("prior.json")).unwrap();
    for (domain, data, stats, out) in [
        (Domain::Source, "source", "stats_s.json", "bank_s"),
        (Domain::Target, "target", "stats_t.json", "bank_t"),
    ] {
        cmd_build_bank(&BuildBankArgs {
            dataset_dir: f.path(data),
            domain,
            grid_cols: 4,
            grid_rows: 3,
            num_classes: k,
            conf_groups: 3,
            stats: f.path(stats),
            out_dir: f.path(out),
        })
        .unwrap();
    }
    f
}

/// Every file under `dir`, relative path and contents, sorted.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.push((
                    p.strip_prefix(base).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
