//! End-to-end run on disk: stats, prior, both banks and a mixed dataset.
//! This is what the `bdm` binary does, called as a library.
//!
//! ```bash
//! cargo run --example bdm_mix [work_dir]
//! ```

use std::path::{Path, PathBuf};

use bdm::bank::Domain;
use bdm::commands::{cmd_build_bank, cmd_mix, cmd_prior, cmd_stats, BuildBankArgs, MixArgs};
use bdm::config::RunConfig;
use bdm::io::write_sample;
use bdm::manifest::read_manifest;
use bdm::synth::{block_dataset, BlockSpec};

fn write_dataset(dir: &Path, prefix: &str, seed: u64) -> bdm::Result<()> {
    let spec = BlockSpec::new(64, 48, 8, vec![0.6, 0.3, 0.1]).with_ignore(4, 20);
    for s in block_dataset(prefix, 30, &spec, seed)? {
        write_sample(dir, &s)?;
    }
    Ok(())
}

fn bank(dir: &Path, domain: Domain, stats: &Path, out: PathBuf) -> bdm::Result<()> {
    let bank = cmd_build_bank(&BuildBankArgs {
        dataset_dir: dir.into(),
        domain,
        grid_cols: 4,
        grid_rows: 3,
        num_classes: 3,
        conf_groups: 3,
        stats: stats.into(),
        out_dir: out,
    })?;
    println!(
        "{domain:?} bank: {} non-empty sequences",
        bank.non_empty_keys().len()
    );
    Ok(())
}

fn main() -> bdm::Result<()> {
    let work: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("bdm-example-mix"));
    let (src, tgt) = (work.join("source"), work.join("target"));
    write_dataset(&src, "src", 1)?;
    write_dataset(&tgt, "tgt", 2)?;

    cmd_stats(&src, 3, &work.join("stats_s.json"))?;
    cmd_stats(&tgt, 3, &work.join("stats_t.json"))?;
    cmd_prior(&src, 3, 0.1, &work.join("prior.json"))?;
    bank(
        &src,
        Domain::Source,
        &work.join("stats_s.json"),
        work.join("bank_s"),
    )?;
    bank(
        &tgt,
        Domain::Target,
        &work.join("stats_t.json"),
        work.join("bank_t"),
    )?;

    let mut config = RunConfig::default();
    config.mix.num_classes = 3;
    config.mix.seed = 42;
    let p = &mut config.paths;
    p.source_dir = Some(src);
    p.target_dir = Some(tgt);
    p.source_bank = Some(work.join("bank_s"));
    p.target_bank = Some(work.join("bank_t"));
    p.stats = Some(work.join("stats_s.json"));
    p.prior = Some(work.join("prior.json"));
    p.out_dir = Some(work.join("mixed"));

    let summary = cmd_mix(&MixArgs {
        config,
        count: 10,
        workers: 0,
    })?;
    println!(
        "mixed {} pairs, {} cells cut",
        summary.pairs, summary.cut_cells
    );

    let manifest = read_manifest(&work.join("mixed/manifest.jsonl"))?.expect("manifest written");
    for e in manifest.entries.iter().take(4) {
        let donors: Vec<&str> = e
            .provenance
            .iter()
            .map(|r| r.patch_sample_id.as_str())
            .collect();
        println!("{} {} <- {donors:?}", e.direction, e.sample_id);
    }
    println!("outputs in {}", work.join("mixed").display());
    Ok(())
}
