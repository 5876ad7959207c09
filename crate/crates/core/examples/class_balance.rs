//! Class-balance weights for a long-tailed pixel distribution.
//!
//! ```bash
//! cargo run --example class_balance
//! ```

use bdm::stats::{class_balance_probs, ClassStats};
use bdm::synth::{block_dataset, long_tail_shares, BlockSpec};

fn main() -> bdm::Result<()> {
    let counts = [900_000u64, 90_000, 10_000, 0];
    println!("counts {counts:?}");
    for alpha in [0.0, 1.0, 2.0, 4.0] {
        let p = class_balance_probs(&counts, alpha)?;
        println!("alpha {alpha}: {p:.4?}");
    }

    // the same numbers from a synthetic dataset's statistics
    let spec = BlockSpec::new(64, 48, 8, long_tail_shares()).with_ignore(2, 16);
    let data = block_dataset("lt", 50, &spec, 3)?;
    let stats = ClassStats::from_samples(&data, 3)?;
    println!("pixel counts {:?}", stats.pixel_counts);
    println!("difficulty   {:.3?}", stats.difficulty);
    println!("balance      {:.4?}", stats.class_balance(2.0)?);
    Ok(())
}
