//! Batch mixing over whole datasets.
//!
//! Pair `i` mixes source sample `i % Ns` with a target sample drawn from an
//! rng seeded by `(seed, i)`; the pair itself runs on an rng seeded by
//! [`pair_seed`]. Pairs are processed in parallel chunks and written in index
//! order, so the output does not depend on the worker count.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{BdmError, Result};
use crate::io::{write_image, write_label, IMAGES_DIR, LABELS_DIR};
use crate::manifest::{write_manifest, ManifestEntry, ManifestHeader};
use crate::mix::{MixContext, MixedSample};
use crate::seed::{derive_seed, pair_seed, rng_from_seed};
use crate::types::Sample;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
const CHUNK: usize = 256;

/// Dataset positions of the source and target sample in pair `index`.
pub fn pair_positions(
    seed: u64,
    index: u64,
    num_source: usize,
    num_target: usize,
) -> (usize, usize) {
    let src = (index % num_source as u64) as usize;
    let mut rng = rng_from_seed(derive_seed(seed, &[b"target", &index.to_le_bytes()]));
    (src, rng.random_range(0..num_target))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairOutput {
    pub index: u64,
    pub pair_seed: u64,
    pub source: MixedSample,
    pub target: MixedSample,
}

/// Mixes pair `index` in isolation.
pub fn mix_indexed_pair(
    ctx: &MixContext<'_>,
    source: &[Sample],
    target: &[Sample],
    seed: u64,
    index: u64,
) -> Result<PairOutput> {
    if source.is_empty() || target.is_empty() {
        return Err(BdmError::data("both datasets need at least one sample"));
    }
    let (si, ti) = pair_positions(seed, index, source.len(), target.len());
    let (src, tgt) = (&source[si], &target[ti]);
    let ps = pair_seed(seed, index, &src.id, &tgt.id);
    let (s, t) = ctx.mix_pair(src, tgt, &mut rng_from_seed(ps))?;
    Ok(PairOutput {
        index,
        pair_seed: ps,
        source: s,
        target: t,
    })
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BdmError::Invariant(format!("worker pool: {e}")))
}

/// Mixes pairs `0..count` in memory. `workers == 0` uses one thread per core.
pub fn mix_pairs(
    ctx: &MixContext<'_>,
    source: &[Sample],
    target: &[Sample],
    seed: u64,
    count: u64,
    workers: usize,
) -> Result<Vec<PairOutput>> {
    build_pool(workers)?.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| mix_indexed_pair(ctx, source, target, seed, i))
            .collect()
    })
}

/// Relative output paths for one mixed sample.
pub fn output_names(index: u64, mixed: &MixedSample) -> (String, String) {
    let stem = format!("{index:06}_{}_{}.png", mixed.domain.tag(), mixed.sample_id);
    (
        format!("{IMAGES_DIR}/{stem}"),
        format!("{LABELS_DIR}/{stem}"),
    )
}

fn write_pair(out_dir: &Path, pair: &PairOutput) -> Result<[ManifestEntry; 2]> {
    let mut entries = Vec::with_capacity(2);
    for (mixed, partner) in [(&pair.source, &pair.target), (&pair.target, &pair.source)] {
        let (image, label) = output_names(pair.index, mixed);
        write_image(&out_dir.join(&image), &mixed.image)?;
        write_label(&out_dir.join(&label), &mixed.label)?;
        entries.push(ManifestEntry::from_mixed(
            pair.index,
            pair.pair_seed,
            &partner.sample_id,
            mixed,
            image,
            label,
        ));
    }
    Ok(entries.try_into().expect("two directions"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub pairs: u64,
    pub cut_cells: u64,
    pub entries: Vec<ManifestEntry>,
}

/// Mixes `count` pairs, writing images, labels and `manifest.jsonl` under
/// `out_dir`.
#[allow(clippy::too_many_arguments)]
pub fn run_mix(
    ctx: &MixContext<'_>,
    source: &[Sample],
    target: &[Sample],
    seed: u64,
    count: u64,
    workers: usize,
    header: &ManifestHeader,
    out_dir: &Path,
) -> Result<RunSummary> {
    let pool = build_pool(workers)?;
    let mut entries = Vec::with_capacity(2 * count as usize);
    let mut start = 0u64;
    while start < count {
        let end = (start + CHUNK as u64).min(count);
        let chunk: Vec<[ManifestEntry; 2]> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| write_pair(out_dir, &mix_indexed_pair(ctx, source, target, seed, i)?))
                .collect::<Result<_>>()
        })?;
        entries.extend(chunk.into_iter().flatten());
        log::debug!("mixed pairs {start}..{end}");
        start = end;
    }
    let path = out_dir.join(MANIFEST_FILE);
    let file = File::create(&path).map_err(|e| BdmError::io(&path, e))?;
    write_manifest(BufWriter::new(file), header, &entries).map_err(|e| BdmError::io(&path, e))?;
    Ok(RunSummary {
        pairs: count,
        cut_cells: entries
            .iter()
            .map(|e| e.cut_plan.cut_cells.len() as u64)
            .sum(),
        entries,
    })
}
