//! Confidence-based cutout: grid cells dominated by ignored pixels are blanked.
//!
//! ```bash
//! cargo run --example confidence_cut
//! ```

use bdm::cut::{confidence_cutout, uncertain_ratio};
use bdm::seed::rng_from_seed;
use bdm::synth::{block_dataset, BlockSpec};
use bdm::types::{GridSpec, IGNORE};

fn main() -> bdm::Result<()> {
    let spec = BlockSpec::new(48, 36, 2, vec![0.5, 0.3, 0.2]).with_ignore(5, 14);
    let sample = block_dataset("cut", 1, &spec, 11)?.remove(0);
    let grid = GridSpec::for_image(48, 36, 4, 3)?;

    for (i, rect) in grid.cell_rects().enumerate() {
        print!("{:>5.2}", uncertain_ratio(&sample.label, &rect)?);
        if (i + 1) % 4 == 0 {
            println!();
        }
    }

    let (cut, plan) = confidence_cutout(&sample, &grid, 0.2, 6, &mut rng_from_seed(1))?;
    println!("candidates {:?}", plan.candidates);
    println!("cut        {:?}", plan.cut_cells);
    let blanked = cut.label.data().iter().filter(|&&v| v == IGNORE).count();
    println!("{blanked} ignored pixels after cutting");
    Ok(())
}
