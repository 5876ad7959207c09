//! The operations behind each `bdm` subcommand. Each takes plain arguments,
//! does its own file I/O and returns a short summary, so the binary only
//! parses flags and maps errors to exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bank::{DatasetCrops, Domain, PatchBank};
use crate::config::{require, RunConfig};
use crate::error::{BdmError, Result};
use crate::io::{
    decode_probability_bin, quantized_sum_tolerance, read_bytes, read_dataset, read_dataset_labels,
    read_probability_pngs, sample_paths, write_bytes, write_confidence, write_label, PROBS_DIR,
};
use crate::manifest::{
    config_hash, read_manifest, ManifestHeader, MANIFEST_FORMAT, MANIFEST_VERSION,
};
use crate::mix::MixContext;
use crate::persist::{
    load_bank, load_prior, load_stats, save_bank, save_prior, save_stats, sha256_hex, BANK_INDEX,
};
use crate::pipeline::{run_mix, RunSummary};
use crate::pseudo_label::{
    pseudo_label_prevalidated, ProbabilityMap, ThresholdFitter, ThresholdPolicy, SUM_TOLERANCE,
};
use crate::report::{write_report, WrittenReport};
use crate::stats::{build_spatial_prior, ClassStats};
use crate::types::{GridSpec, MixConfig};

pub const THRESHOLDS_FILE: &str = "thresholds.json";

/// Ids under `probs/`: `<id>.bin` blobs and `<id>/` plane directories.
pub fn list_probability_ids(root: &Path) -> Result<Vec<String>> {
    let dir = root.join(PROBS_DIR);
    let mut ids = Vec::new();
    for entry in fs::read_dir(&dir).map_err(|e| BdmError::io(&dir, e))? {
        let path = entry.map_err(|e| BdmError::io(&dir, e))?.path();
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string);
        let is_bin = path.extension().and_then(|e| e.to_str()) == Some("bin");
        if let Some(stem) = stem.filter(|_| is_bin || path.is_dir()) {
            ids.push(stem);
        }
    }
    ids.sort();
    ids.dedup();
    Ok(ids)
}

/// Reads and validates one probability map, preferring the `.bin` form.
pub fn read_probabilities(root: &Path, id: &str) -> Result<ProbabilityMap> {
    let p = sample_paths(root, id);
    if p.probs_bin.exists() {
        let map = decode_probability_bin(&read_bytes(&p.probs_bin)?)
            .map_err(|e| BdmError::data(format!("{}: {e}", p.probs_bin.display())))?;
        map.validate(SUM_TOLERANCE)?;
        Ok(map)
    } else {
        let map = read_probability_pngs(&p.probs_dir)?;
        map.validate(quantized_sum_tolerance(map.num_classes()))?;
        Ok(map)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsDoc {
    pub policy: ThresholdPolicy,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelSummary {
    pub samples: usize,
    pub thresholds: Vec<f64>,
    pub ignored_fraction: f64,
}

/// Pseudo-labels every probability map of `dataset_dir` into `out_dir`
/// (labels, confidences, copied images and the thresholds used).
///
/// Per-class quantile thresholds are fitted over the whole dataset in two
/// streaming passes.
pub fn cmd_pseudo_label(
    dataset_dir: &Path,
    policy: ThresholdPolicy,
    out_dir: &Path,
) -> Result<PseudoLabelSummary> {
    let ids = list_probability_ids(dataset_dir)?;
    if ids.is_empty() {
        return Err(BdmError::data(format!(
            "{}: no probability maps under {PROBS_DIR}/",
            dataset_dir.display()
        )));
    }
    let thresholds = match policy {
        ThresholdPolicy::Fixed { threshold } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(BdmError::config(format!(
                    "threshold {threshold} outside [0, 1]"
                )));
            }
            None
        }
        ThresholdPolicy::PerClassQuantile { quantile } => {
            let k = read_probabilities(dataset_dir, &ids[0])?.num_classes();
            let mut fitter = ThresholdFitter::new(k, quantile)?;
            for id in &ids {
                fitter.observe_pass1(&read_probabilities(dataset_dir, id)?)?;
            }
            fitter.finish_pass1();
            for id in &ids {
                fitter.observe_pass2(&read_probabilities(dataset_dir, id)?)?;
            }
            Some(fitter.finish())
        }
    };
    let results: Vec<(u64, u64, usize)> = ids
        .par_iter()
        .map(|id| {
            let prob = read_probabilities(dataset_dir, id)?;
            let (label, conf) = pseudo_label_prevalidated(&prob, policy, thresholds.as_deref())?;
            let out = sample_paths(out_dir, id);
            write_label(&out.label, &label)?;
            write_confidence(&out.confidence, &conf)?;
            let src_image = sample_paths(dataset_dir, id).image;
            if src_image.exists() {
                write_bytes(&out.image, &read_bytes(&src_image)?)?;
            }
            let ignored = label
                .data()
                .iter()
                .filter(|&&v| v == crate::types::IGNORE)
                .count();
            Ok((
                ignored as u64,
                label.data().len() as u64,
                prob.num_classes(),
            ))
        })
        .collect::<Result<_>>()?;
    let k = results[0].2;
    if results.iter().any(|r| r.2 != k) {
        return Err(BdmError::data(
            "probability maps disagree on the class count",
        ));
    }
    let thresholds = match (thresholds, policy) {
        (Some(t), _) => t,
        (None, ThresholdPolicy::Fixed { threshold }) => vec![threshold; k],
        (None, _) => unreachable!("quantile policy always fits thresholds"),
    };
    let doc = ThresholdsDoc {
        policy,
        thresholds: thresholds.clone(),
    };
    let json = serde_json::to_vec_pretty(&doc)
        .map_err(|e| BdmError::Invariant(format!("thresholds: {e}")))?;
    write_bytes(&out_dir.join(THRESHOLDS_FILE), &json)?;
    let ignored: u64 = results.iter().map(|r| r.0).sum();
    let total: u64 = results.iter().map(|r| r.1).sum();
    Ok(PseudoLabelSummary {
        samples: ids.len(),
        thresholds,
        ignored_fraction: ignored as f64 / total.max(1) as f64,
    })
}

pub fn cmd_stats(dataset_dir: &Path, num_classes: usize, out: &Path) -> Result<ClassStats> {
    let samples = read_dataset(dataset_dir)?;
    if samples.is_empty() {
        return Err(BdmError::data(format!(
            "{}: no labeled samples",
            dataset_dir.display()
        )));
    }
    let stats = ClassStats::from_samples(&samples, num_classes)?;
    save_stats(out, &stats)?;
    Ok(stats)
}

pub fn cmd_prior(dataset_dir: &Path, num_classes: usize, bandwidth: f64, out: &Path) -> Result<()> {
    let labels = read_dataset_labels(dataset_dir)?;
    let prior = build_spatial_prior(&labels, num_classes, bandwidth)?;
    save_prior(out, &prior)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildBankArgs {
    pub dataset_dir: PathBuf,
    pub domain: Domain,
    pub grid_cols: u32,
    pub grid_rows: u32,
    pub num_classes: usize,
    pub conf_groups: usize,
    pub stats: PathBuf,
    pub out_dir: PathBuf,
}

pub fn cmd_build_bank(args: &BuildBankArgs) -> Result<PatchBank> {
    let stats = load_stats(&args.stats)?;
    if stats.num_classes != args.num_classes {
        return Err(BdmError::config(format!(
            "stats file has {} classes, --classes is {}",
            stats.num_classes, args.num_classes
        )));
    }
    let samples = read_dataset(&args.dataset_dir)?;
    let first = samples.first().ok_or_else(|| {
        BdmError::data(format!(
            "{}: no labeled samples",
            args.dataset_dir.display()
        ))
    })?;
    let grid = GridSpec::for_image(
        first.width(),
        first.height(),
        args.grid_cols,
        args.grid_rows,
    )?;
    let bank = PatchBank::build(
        args.domain,
        &samples,
        grid,
        args.num_classes,
        args.conf_groups,
        &stats.difficulty,
    )?;
    save_bank(&args.out_dir, &bank, &DatasetCrops::new(&samples))?;
    Ok(bank)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixArgs {
    pub config: RunConfig,
    pub count: u64,
    pub workers: usize,
}

/// Runs a full mix. The config is validated before anything is read.
pub fn cmd_mix(args: &MixArgs) -> Result<RunSummary> {
    let cfg: &MixConfig = &args.config.mix;
    cfg.validate()?;
    let paths = &args.config.paths;
    let source_dir = require(&paths.source_dir, "source_dir")?;
    let target_dir = require(&paths.target_dir, "target_dir")?;
    let source_bank = require(&paths.source_bank, "source_bank")?;
    let target_bank = require(&paths.target_bank, "target_bank")?;
    let out_dir = require(&paths.out_dir, "out_dir")?;

    let source = read_dataset(source_dir)?;
    let target = read_dataset(target_dir)?;
    let stats = match &paths.stats {
        Some(p) => load_stats(p)?,
        None => ClassStats::from_samples(&source, cfg.num_classes)?,
    };
    let prior = match &paths.prior {
        Some(p) => load_prior(p)?,
        None => {
            let labels: Vec<_> = source.iter().map(|s| s.label.clone()).collect();
            build_spatial_prior(&labels, cfg.num_classes, cfg.bandwidth)?
        }
    };
    let class_balance = stats.class_balance(cfg.alpha)?;
    let bank_s = load_bank(source_bank)?;
    let bank_t = load_bank(target_bank)?;
    let ctx = MixContext::new(bank_s.view(), bank_t.view(), &class_balance, &prior, cfg)?;

    let header = ManifestHeader {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        pair_count: args.count,
        source_dir: source_dir.display().to_string(),
        target_dir: target_dir.display().to_string(),
        source_bank_sha256: sha256_hex(&read_bytes(&source_bank.join(BANK_INDEX))?),
        target_bank_sha256: sha256_hex(&read_bytes(&target_bank.join(BANK_INDEX))?),
    };
    fs::create_dir_all(out_dir).map_err(|e| BdmError::io(out_dir, e))?;
    run_mix(
        &ctx,
        &source,
        &target,
        cfg.seed,
        args.count,
        args.workers,
        &header,
        out_dir,
    )
}

pub fn cmd_report(
    manifest: &Path,
    stats: Option<&Path>,
    baseline: Option<&Path>,
    composites: usize,
    out_dir: &Path,
) -> Result<WrittenReport> {
    let m = read_manifest(manifest)?;
    let b = baseline.map(read_manifest).transpose()?.flatten();
    let s = stats.map(load_stats).transpose()?;
    let run_dir = manifest.parent().unwrap_or(Path::new("."));
    write_report(
        m.as_ref(),
        run_dir,
        b.as_ref(),
        s.as_ref(),
        composites,
        out_dir,
    )
}
