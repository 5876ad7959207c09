//! Mixing straight from row-major byte buffers, the way a language binding
//! would call in.
//!
//! ```bash
//! cargo run --example buffer_interop
//! ```

use bdm::bank::Domain;
use bdm::commands::{cmd_build_bank, cmd_prior, cmd_stats, BuildBankArgs};
use bdm::interop::{error_code, load_bank, mix_pair, sample_from_buffers, MixResources};
use bdm::io::write_sample;
use bdm::synth::{block_dataset, BlockSpec};
use bdm::types::{MixConfig, Sample};

fn to_buffers(s: &Sample) -> (Vec<u8>, Vec<u8>, Vec<f32>) {
    (
        s.image.data().to_vec(),
        s.label.data().to_vec(),
        s.confidence_or_ones().data().to_vec(),
    )
}

fn main() -> bdm::Result<()> {
    let work = std::env::temp_dir().join("bdm-example-interop");
    let spec = BlockSpec::new(48, 36, 4, vec![0.6, 0.3, 0.1]).with_ignore(4, 14);
    let mut sets = Vec::new();
    for (name, domain, seed) in [("s", Domain::Source, 1), ("t", Domain::Target, 2)] {
        let data = block_dataset(name, 12, &spec, seed)?;
        let dir = work.join(name);
        for s in &data {
            write_sample(&dir, s)?;
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
        sets.push(data);
    }
    cmd_prior(&work.join("s"), 3, 0.1, &work.join("prior.json"))?;

    let bank_s = load_bank(&work.join("bank_s"))?;
    let bank_t = load_bank(&work.join("bank_t"))?;
    let resources = MixResources::load(&work.join("stats_s.json"), &work.join("prior.json"), 2.0)?;
    let config = MixConfig {
        num_classes: 3,
        ..MixConfig::default()
    };

    let (img, lbl, conf) = to_buffers(&sets[0][0]);
    let src = sample_from_buffers("s0000", 36, 48, &img, &lbl, Some(&conf))?;
    let (img, lbl, conf) = to_buffers(&sets[1][0]);
    let tgt = sample_from_buffers("t0000", 36, 48, &img, &lbl, Some(&conf))?;

    let (s, t) = mix_pair(&bank_s, &bank_t, &resources, &src, &tgt, &config, 99)?;
    println!(
        "{}: {}x{}, cut {:?}",
        s.sample_id, s.width, s.height, s.cut_plan.cut_cells
    );
    println!(
        "{}: {}x{}, cut {:?}",
        t.sample_id, t.width, t.height, t.cut_plan.cut_cells
    );
    println!(
        "image buffer {} bytes, label buffer {} bytes",
        s.image.len(),
        s.label.len()
    );

    let err = sample_from_buffers("bad", 36, 48, &img[1..], &lbl, None).unwrap_err();
    println!("short image buffer -> code {}: {err}", error_code(&err));
    Ok(())
}
