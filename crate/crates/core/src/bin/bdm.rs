use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bdm::bank::Domain;
use bdm::commands::{
    cmd_build_bank, cmd_mix, cmd_prior, cmd_pseudo_label, cmd_report, cmd_stats, BuildBankArgs,
    MixArgs,
};
use bdm::config::RunConfig;
use bdm::pseudo_label::ThresholdPolicy;
use bdm::types::SelectionMode;
use bdm::{BdmError, Result};

/// Bidirectional domain mixup for segmentation datasets.
#[derive(Parser)]
#[command(name = "bdm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Threshold per-pixel class probabilities into pseudo labels.
    PseudoLabel {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fixed confidence threshold for every class.
        #[arg(long, conflicts_with = "quantile")]
        threshold: Option<f64>,
        /// Per-class quantile of max-probabilities (capped at 0.9).
        #[arg(long, default_value_t = 0.5)]
        quantile: f64,
    },
    /// Class pixel counts and per-class difficulty.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 19)]
        classes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Class-wise spatial prior maps.
    Prior {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 19)]
        classes: usize,
        #[arg(long, default_value_t = 0.1)]
        bandwidth: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Index a dataset's grid patches by cell, class and confidence group.
    BuildBank {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = ["source", "target"])]
        domain: String,
        #[arg(long, default_value_t = 4)]
        grid_cols: u32,
        #[arg(long, default_value_t = 3)]
        grid_rows: u32,
        #[arg(long, default_value_t = 19)]
        classes: usize,
        #[arg(long, default_value_t = 3)]
        groups: usize,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mix source/target pairs and write images, labels and a manifest.
    Mix(MixCli),
    /// Pasted-supervision report for a mix manifest.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Manifest of a comparison run, e.g. uniform-patch selection.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        composites: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct MixCli {
    /// TOML run config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    source_dir: Option<PathBuf>,
    #[arg(long)]
    target_dir: Option<PathBuf>,
    #[arg(long)]
    source_bank: Option<PathBuf>,
    #[arg(long)]
    target_bank: Option<PathBuf>,
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    prior: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["joint", "uniform-patch"])]
    selection: Option<String>,
    /// Worker threads; 0 means one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(m: &MixCli) -> Result<RunConfig> {
    let mut cfg = match &m.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let p = &mut cfg.paths;
    for (slot, flag) in [
        (&mut p.source_dir, &m.source_dir),
        (&mut p.target_dir, &m.target_dir),
        (&mut p.source_bank, &m.source_bank),
        (&mut p.target_bank, &m.target_bank),
        (&mut p.stats, &m.stats),
        (&mut p.prior, &m.prior),
        (&mut p.out_dir, &m.out),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(seed) = m.seed {
        cfg.mix.seed = seed;
    }
    match m.selection.as_deref() {
        Some("joint") => cfg.mix.selection = SelectionMode::Joint,
        Some(_) => cfg.mix.selection = SelectionMode::UniformPatch,
        None => {}
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PseudoLabel {
            dataset,
            out,
            threshold,
            quantile,
        } => {
            let policy = match threshold {
                Some(threshold) => ThresholdPolicy::Fixed { threshold },
                None => ThresholdPolicy::PerClassQuantile { quantile },
            };
            let s = cmd_pseudo_label(&dataset, policy, &out)?;
            println!(
                "pseudo-labeled {} samples, {:.2}% ignored",
                s.samples,
                100.0 * s.ignored_fraction
            );
        }
        Command::Stats {
            dataset,
            classes,
            out,
        } => {
            let s = cmd_stats(&dataset, classes, &out)?;
            println!(
                "{} samples, {} labeled pixels",
                s.num_samples,
                s.pixel_counts.iter().sum::<u64>()
            );
        }
        Command::Prior {
            dataset,
            classes,
            bandwidth,
            out,
        } => {
            cmd_prior(&dataset, classes, bandwidth, &out)?;
            println!("wrote {}", out.display());
        }
        Command::BuildBank {
            dataset,
            domain,
            grid_cols,
            grid_rows,
            classes,
            groups,
            stats,
            out,
        } => {
            let bank = cmd_build_bank(&BuildBankArgs {
                dataset_dir: dataset,
                domain: if domain == "source" {
                    Domain::Source
                } else {
                    Domain::Target
                },
                grid_cols,
                grid_rows,
                num_classes: classes,
                conf_groups: groups,
                stats,
                out_dir: out,
            })?;
            println!(
                "{} patches, {} non-empty sequences",
                bank.patches().len(),
                bank.non_empty_keys().len()
            );
        }
        Command::Mix(m) => {
            let config = resolve(&m)?;
            if m.print_config {
                print!("{}", config.to_toml_string()?);
                return Ok(());
            }
            let s = cmd_mix(&MixArgs {
                config,
                count: m.count,
                workers: m.workers,
            })?;
            println!("mixed {} pairs, {} cells cut", s.pairs, s.cut_cells);
        }
        Command::Report {
            manifest,
            stats,
            baseline,
            composites,
            out,
        } => {
            let w = cmd_report(
                &manifest,
                stats.as_deref(),
                baseline.as_deref(),
                composites,
                &out,
            )?;
            for warning in &w.report.warnings {
                log::warn!("{warning}");
            }
            println!("wrote {} files", w.files.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bdm: {e}");
            ExitCode::from(exit_byte(&e))
        }
    }
}

fn exit_byte(e: &BdmError) -> u8 {
    e.exit_code().clamp(1, 255) as u8
}
