//! Index a dataset into a patch bank, inspect it and round-trip it through disk.
//!
//! ```bash
//! cargo run --example patch_bank [out_dir]
//! ```

use bdm::bank::{DatasetCrops, Domain, PatchBank};
use bdm::persist::{load_bank, save_bank};
use bdm::stats::ClassStats;
use bdm::synth::{block_dataset, BlockSpec};
use bdm::types::GridSpec;

fn main() -> bdm::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("bdm-example-bank"));

    let spec = BlockSpec::new(32, 24, 4, vec![0.4, 0.25, 0.15, 0.12, 0.08]).with_ignore(3, 10);
    let data = block_dataset("b", 50, &spec, 9)?;
    let stats = ClassStats::from_samples(&data, 5)?;
    let grid = GridSpec::for_image(32, 24, 4, 3)?;
    let bank = PatchBank::build(Domain::Source, &data, grid, 5, 3, &stats.difficulty)?;

    println!(
        "{} patches, {} sequences, {} non-empty",
        bank.patches().len(),
        bank.sequence_count(),
        bank.non_empty_keys().len()
    );
    let (cell, class) = (5, 4);
    for group in 0..3 {
        let ids = bank.query(cell, class, group)?;
        let scores: Vec<f64> = ids.iter().map(|&id| bank.patch(id).score).collect();
        println!(
            "cell {cell} class {class} group {group}: {} patches, scores {scores:.3?}",
            ids.len()
        );
    }

    save_bank(&out, &bank, &DatasetCrops::new(&data))?;
    let loaded = load_bank(&out)?;
    assert_eq!(loaded.bank.non_empty_keys(), bank.non_empty_keys());
    println!("saved and reloaded {}", out.display());
    Ok(())
}
