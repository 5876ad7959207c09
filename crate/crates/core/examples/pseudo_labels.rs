//! Turn softmax outputs into pseudo labels under both threshold policies.
//!
//! ```bash
//! cargo run --example pseudo_labels
//! ```

use bdm::pseudo_label::{fit_class_thresholds, pseudo_label, ProbabilityMap, ThresholdPolicy};
use bdm::seed::rng_from_seed;
use bdm::types::IGNORE;
use rand::Rng;

const K: usize = 4;

/// A random softmax map whose winning class is sharper on the left half.
fn fake_softmax(width: u32, height: u32, seed: u64) -> ProbabilityMap {
    let mut rng = rng_from_seed(seed);
    let mut pixels = Vec::new();
    for _y in 0..height {
        for x in 0..width {
            let sharp = if x < width / 2 { 6.0 } else { 1.5 };
            let winner = rng.random_range(0..K);
            let logits: Vec<f64> = (0..K)
                .map(|c| rng.random::<f64>() + if c == winner { sharp } else { 0.0 })
                .collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            pixels.push(logits.iter().map(|l| (l.exp() / z) as f32).collect());
        }
    }
    ProbabilityMap::from_pixels(width, height, &pixels).unwrap()
}

fn main() -> bdm::Result<()> {
    let maps: Vec<_> = (0..8).map(|i| fake_softmax(32, 24, i)).collect();

    let fixed = ThresholdPolicy::Fixed { threshold: 0.9 };
    let (label, conf) = pseudo_label(&maps[0], fixed, None)?;
    let ignored = label.data().iter().filter(|&&v| v == IGNORE).count();
    println!(
        "fixed 0.9: {ignored} of {} pixels ignored",
        label.data().len()
    );
    println!("confidence at (0,0) = {:.3}", conf.get(0, 0));

    // dataset-level per-class thresholds, then applied map by map
    let thresholds = fit_class_thresholds(&maps, 0.5)?;
    println!("per-class median thresholds: {thresholds:.3?}");
    let policy = ThresholdPolicy::PerClassQuantile { quantile: 0.5 };
    for (i, map) in maps.iter().enumerate().take(3) {
        let (label, _) = pseudo_label(map, policy, Some(&thresholds))?;
        let ignored = label.data().iter().filter(|&&v| v == IGNORE).count();
        println!(
            "map {i}: {:.1}% ignored",
            100.0 * ignored as f64 / label.data().len() as f64
        );
    }
    Ok(())
}
