//! Seeded synthetic segmentation datasets for examples and tests.
//!
//! Labels are built from square blocks whose classes are drawn from a share
//! vector, optionally with rectangular IGNORE blobs planted on top. Images
//! paint each pixel with its class palette colour plus a per-sample tint, and
//! confidences are high on labeled pixels and low on IGNORE pixels.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{BdmError, Result};
use crate::io::palette_color;
use crate::seed::{derive_seed, rng_from_seed, MixRng};
use crate::types::{ConfidenceMap, Image, LabelMap, Rect, Sample, IGNORE};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub width: u32,
    pub height: u32,
    /// Side of the square blocks that share one class.
    pub block: u32,
    /// Relative frequency of each class id.
    pub shares: Vec<f64>,
    /// IGNORE rectangles planted per sample.
    pub ignore_blobs: usize,
    /// Largest blob side, in pixels.
    pub blob_max: u32,
}

impl BlockSpec {
    pub fn new(width: u32, height: u32, block: u32, shares: Vec<f64>) -> Self {
        Self {
            width,
            height,
            block,
            shares,
            ignore_blobs: 0,
            blob_max: 0,
        }
    }

    pub fn with_ignore(mut self, blobs: usize, blob_max: u32) -> Self {
        self.ignore_blobs = blobs;
        self.blob_max = blob_max;
        self
    }
}

fn sample_rng(seed: u64, prefix: &str, index: usize) -> MixRng {
    rng_from_seed(derive_seed(
        seed,
        &[b"synth", prefix.as_bytes(), &(index as u64).to_le_bytes()],
    ))
}

/// Paints image and confidence from a finished label map.
fn dress(id: String, label: LabelMap, rng: &mut MixRng) -> Result<Sample> {
    let (w, h) = label.dims();
    let tint: [i16; 3] = [
        rng.random_range(-20..=20),
        rng.random_range(-20..=20),
        rng.random_range(-20..=20),
    ];
    let mut image = Image::filled(w, h, [0, 0, 0]);
    let mut conf = Vec::with_capacity(label.data().len());
    for y in 0..h {
        for x in 0..w {
            let c = label.get(x, y);
            let base = if c == IGNORE {
                [128, 128, 128]
            } else {
                palette_color(c)
            };
            let mut px = [0u8; 3];
            for ch in 0..3 {
                px[ch] = (base[ch] as i16 + tint[ch]).clamp(0, 255) as u8;
            }
            image.put_pixel(x, y, px);
            conf.push(if c == IGNORE {
                rng.random_range(0.0f32..0.5)
            } else {
                rng.random_range(0.6f32..=1.0)
            });
        }
    }
    let confidence = ConfidenceMap::from_vec(w, h, conf)?;
    Sample::new(id, image, label, Some(confidence))
}

fn plant_ignore(label: &mut LabelMap, blobs: usize, blob_max: u32, rng: &mut MixRng) -> Result<()> {
    let (w, h) = label.dims();
    for _ in 0..blobs {
        let bw = rng.random_range(1..=blob_max.min(w).max(1));
        let bh = rng.random_range(1..=blob_max.min(h).max(1));
        let x = rng.random_range(0..=w - bw);
        let y = rng.random_range(0..=h - bh);
        label.fill_rect(&Rect::new(x, y, bw, bh), IGNORE)?;
    }
    Ok(())
}

fn block_label(spec: &BlockSpec, rng: &mut MixRng) -> Result<LabelMap> {
    if spec.block == 0 || spec.width == 0 || spec.height == 0 {
        return Err(BdmError::config("synthetic sizes must be positive"));
    }
    let dist = WeightedIndex::new(&spec.shares)
        .map_err(|e| BdmError::config(format!("class shares: {e}")))?;
    let mut label = LabelMap::filled(spec.width, spec.height, 0);
    for by in (0..spec.height).step_by(spec.block as usize) {
        for bx in (0..spec.width).step_by(spec.block as usize) {
            let class = dist.sample(rng) as u8;
            let rect = Rect::new(
                bx,
                by,
                spec.block.min(spec.width - bx),
                spec.block.min(spec.height - by),
            );
            label.fill_rect(&rect, class)?;
        }
    }
    plant_ignore(&mut label, spec.ignore_blobs, spec.blob_max, rng)?;
    Ok(label)
}

/// `n` samples with ids `<prefix>0000`, `<prefix>0001`, ...
pub fn block_dataset(prefix: &str, n: usize, spec: &BlockSpec, seed: u64) -> Result<Vec<Sample>> {
    (0..n)
        .map(|i| {
            let mut rng = sample_rng(seed, prefix, i);
            let label = block_label(spec, &mut rng)?;
            dress(format!("{prefix}{i:04}"), label, &mut rng)
        })
        .collect()
}

/// Like [`block_dataset`], but rows above `band_rows` hold only `band_class`
/// and `band_class` never appears below them (it gets no share there).
pub fn top_band_dataset(
    prefix: &str,
    n: usize,
    spec: &BlockSpec,
    band_class: u8,
    band_rows: u32,
    seed: u64,
) -> Result<Vec<Sample>> {
    let mut below = spec.clone();
    if let Some(s) = below.shares.get_mut(band_class as usize) {
        *s = 0.0;
    }
    (0..n)
        .map(|i| {
            let mut rng = sample_rng(seed, prefix, i);
            let mut label = block_label(&below, &mut rng)?;
            label.fill_rect(
                &Rect::new(0, 0, spec.width, band_rows.min(spec.height)),
                band_class,
            )?;
            dress(format!("{prefix}{i:04}"), label, &mut rng)
        })
        .collect()
}

/// Shares 0.90 / 0.09 / 0.01 for classes 0, 1, 2.
pub fn long_tail_shares() -> Vec<f64> {
    vec![0.90, 0.09, 0.01]
}
