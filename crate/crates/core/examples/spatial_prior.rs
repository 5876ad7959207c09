//! Build a class-wise spatial prior and read spatial-continuity weights off it.
//!
//! ```bash
//! cargo run --example spatial_prior
//! ```

use bdm::mix::spatial_continuity_probs;
use bdm::stats::build_spatial_prior;
use bdm::synth::{top_band_dataset, BlockSpec};
use bdm::types::GridSpec;

fn main() -> bdm::Result<()> {
    // class 3 only ever appears in the top 16 rows, like sky
    let spec = BlockSpec::new(64, 48, 4, vec![1.0, 1.0, 1.0, 0.0]);
    let data = top_band_dataset("sky", 20, &spec, 3, 16, 5)?;
    let labels: Vec<_> = data.iter().map(|s| s.label.clone()).collect();
    let prior = build_spatial_prior(&labels, 4, 0.1)?;

    println!("P(class 3 | y) down the image centre line:");
    for i in 0..8 {
        let y = (i as f64 + 0.5) / 8.0;
        let v = prior.value(3, 0.5, y);
        println!(
            "  y={y:.3} {v:.3} {}",
            "#".repeat((v * 40.0).round() as usize)
        );
    }

    let grid = GridSpec::for_image(64, 48, 4, 3)?;
    let centers = grid.cell_centers();
    let cut = grid.cell_center(1);
    println!(
        "cut cell 1 at {cut:.3?}, query class {}",
        prior.argmax_at(cut.0, cut.1)
    );
    let p = spatial_continuity_probs(&prior, cut, &centers);
    for row in p.chunks(grid.cols as usize) {
        println!("  {row:.3?}");
    }
    Ok(())
}
