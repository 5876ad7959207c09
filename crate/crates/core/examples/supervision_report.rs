//! Compare pasted supervision between joint selection and uniform-patch
//! selection, then write the CSV, histogram and composites.
//!
//! ```bash
//! cargo run --example supervision_report [work_dir]
//! ```

use std::path::{Path, PathBuf};

use bdm::bank::Domain;
use bdm::commands::{cmd_build_bank, cmd_mix, cmd_report, cmd_stats, BuildBankArgs, MixArgs};
use bdm::config::RunConfig;
use bdm::io::write_sample;
use bdm::synth::{block_dataset, long_tail_shares, BlockSpec};
use bdm::types::SelectionMode;

fn prepare(work: &Path, name: &str, domain: Domain, seed: u64) -> bdm::Result<()> {
    let dir = work.join(name);
    let spec = BlockSpec::new(64, 48, 8, long_tail_shares()).with_ignore(4, 20);
    for s in block_dataset(name, 60, &spec, seed)? {
        write_sample(&dir, &s)?;
    }
    let stats = work.join(format!("stats_{name}.json"));
    cmd_stats(&dir, 3, &stats)?;
    cmd_build_bank(&BuildBankArgs {
        dataset_dir: dir,
        domain,
        grid_cols: 4,
        grid_rows: 3,
        num_classes: 3,
        conf_groups: 3,
        stats,
        out_dir: work.join(format!("bank_{name}")),
    })?;
    Ok(())
}

fn main() -> bdm::Result<()> {
    let work: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("bdm-example-report"));
    prepare(&work, "src", Domain::Source, 1)?;
    prepare(&work, "tgt", Domain::Target, 2)?;

    for (mode, out) in [
        (SelectionMode::Joint, "joint"),
        (SelectionMode::UniformPatch, "uniform"),
    ] {
        let mut config = RunConfig::default();
        config.mix.num_classes = 3;
        config.mix.selection = mode;
        config.paths.source_dir = Some(work.join("src"));
        config.paths.target_dir = Some(work.join("tgt"));
        config.paths.source_bank = Some(work.join("bank_src"));
        config.paths.target_bank = Some(work.join("bank_tgt"));
        config.paths.out_dir = Some(work.join(out));
        cmd_mix(&MixArgs {
            config,
            count: 200,
            workers: 0,
        })?;
    }

    let written = cmd_report(
        &work.join("joint/manifest.jsonl"),
        Some(&work.join("stats_src.json")),
        Some(&work.join("uniform/manifest.jsonl")),
        3,
        &work.join("report"),
    )?;
    print!("{}", written.report.to_csv());
    for f in &written.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
