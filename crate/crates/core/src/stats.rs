//! Dataset statistics that drive patch selection: class pixel counts and the
//! class-balance distribution derived from them, per-class difficulty (mean
//! confidence) and class-wise spatial prior maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BdmError, Result};
use crate::types::{ConfidenceMap, LabelMap, Sample, IGNORE};

/// Per-class pixel counts over a set of label maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub counts: Vec<u64>,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// True when no labeled pixel was seen at all.
    pub fn is_degenerate(&self) -> bool {
        self.total() == 0
    }

    pub fn present_classes(&self) -> usize {
        self.counts.iter().filter(|&&n| n > 0).count()
    }
}

/// Counts non-IGNORE pixels per class. Values `>= num_classes` are skipped.
pub fn class_pixel_counts(labels: &[LabelMap], num_classes: usize) -> ClassCounts {
    let counts = labels
        .par_iter()
        .map(|l| histogram(l.data(), num_classes))
        .reduce(
            || vec![0u64; num_classes],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    ClassCounts { counts }
}

fn histogram(data: &[u8], num_classes: usize) -> Vec<u64> {
    let mut full = [0u64; 256];
    for &v in data {
        full[v as usize] += 1;
    }
    full[IGNORE as usize] = 0;
    full[..num_classes].to_vec()
}

/// Class-balance selection probabilities.
///
/// Each present class gets weight `(-ln share)^alpha`, where `share` is its
/// fraction of all labeled pixels, and the weights are normalized. Classes
/// with no pixels get probability 0; a single present class gets 1.
pub fn class_balance_probs(counts: &[u64], alpha: f64) -> Result<Vec<f64>> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(BdmError::config(format!("alpha must be >= 0, got {alpha}")));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(BdmError::data(
            "class balance needs at least one class with a positive pixel count",
        ));
    }
    let present = counts.iter().filter(|&&n| n > 0).count();
    if present == 1 {
        return Ok(counts
            .iter()
            .map(|&n| if n > 0 { 1.0 } else { 0.0 })
            .collect());
    }
    let total = total as f64;
    let raw: Vec<f64> = counts
        .iter()
        .map(|&n| {
            if n == 0 {
                0.0
            } else {
                (-(n as f64 / total).ln()).powf(alpha)
            }
        })
        .collect();
    let norm: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / norm).collect())
}

/// Mean confidence per class plus the dataset-wide mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Difficulty {
    pub per_class: Vec<f64>,
    pub global_mean: f64,
}

/// Per-class mean confidence over labeled pixels.
///
/// Pairs without a confidence plane count as confidence 1.0. Classes with no
/// pixels fall back to the global mean (0 when nothing is labeled).
pub fn class_difficulty<'a, I>(pairs: I, num_classes: usize) -> Result<Difficulty>
where
    I: IntoIterator<Item = (&'a LabelMap, Option<&'a ConfidenceMap>)>,
{
    let mut sums = vec![0.0f64; num_classes];
    let mut counts = vec![0u64; num_classes];
    for (label, conf) in pairs {
        if let Some(conf) = conf {
            if conf.dims() != label.dims() {
                return Err(BdmError::data(format!(
                    "confidence {:?} does not match label {:?}",
                    conf.dims(),
                    label.dims()
                )));
            }
        }
        for (i, &c) in label.data().iter().enumerate() {
            if (c as usize) < num_classes {
                sums[c as usize] += conf.map_or(1.0, |m| m.data()[i] as f64);
                counts[c as usize] += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let global_mean = if total == 0 {
        0.0
    } else {
        sums.iter().sum::<f64>() / total as f64
    };
    let per_class = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { global_mean } else { s / n as f64 })
        .collect();
    Ok(Difficulty {
        per_class,
        global_mean,
    })
}

/// Pixel counts and difficulty for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub num_classes: usize,
    pub num_samples: usize,
    pub pixel_counts: Vec<u64>,
    pub difficulty: Vec<f64>,
    pub global_mean_confidence: f64,
}

impl ClassStats {
    pub fn from_samples(samples: &[Sample], num_classes: usize) -> Result<Self> {
        let labels: Vec<LabelMap> = samples.iter().map(|s| s.label.clone()).collect();
        let counts = class_pixel_counts(&labels, num_classes);
        let difficulty = class_difficulty(
            samples.iter().map(|s| (&s.label, s.confidence.as_ref())),
            num_classes,
        )?;
        Ok(Self {
            num_classes,
            num_samples: samples.len(),
            pixel_counts: counts.counts,
            difficulty: difficulty.per_class,
            global_mean_confidence: difficulty.global_mean,
        })
    }

    pub fn class_balance(&self, alpha: f64) -> Result<Vec<f64>> {
        class_balance_probs(&self.pixel_counts, alpha)
    }
}

/// Default side length of the prior raster.
pub const PRIOR_RESOLUTION: usize = 64;

/// Class-wise spatial prior maps on a square raster over normalized image
/// coordinates.
///
/// Raster node `(ix, iy)` sits at `((ix + 0.5) / res, (iy + 0.5) / res)`.
/// A node's value is the kernel-smoothed frequency of the class around it:
/// Gaussian-weighted class pixel count over Gaussian-weighted pixel count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialPrior {
    pub num_classes: usize,
    pub resolution: usize,
    pub bandwidth: f64,
    /// `num_classes * resolution * resolution` values, class-major then row-major.
    pub values: Vec<f64>,
    /// Classes that never occurred; their maps are all zero.
    pub empty: Vec<bool>,
}

impl SpatialPrior {
    pub fn map(&self, class: usize) -> &[f64] {
        let n = self.resolution * self.resolution;
        &self.values[class * n..(class + 1) * n]
    }

    pub fn node(&self, class: usize, ix: usize, iy: usize) -> f64 {
        self.map(class)[iy * self.resolution + ix]
    }

    /// Bilinear lookup at normalized coordinates; clamps at the raster border.
    pub fn value(&self, class: usize, x: f64, y: f64) -> f64 {
        let res = self.resolution;
        let last = (res - 1) as f64;
        let fx = (x * res as f64 - 0.5).clamp(0.0, last);
        let fy = (y * res as f64 - 0.5).clamp(0.0, last);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(res - 1);
        let y1 = (y0 + 1).min(res - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let top = self.node(class, x0, y0) * (1.0 - tx) + self.node(class, x1, y0) * tx;
        let bottom = self.node(class, x0, y1) * (1.0 - tx) + self.node(class, x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// Class with the largest prior value at a point; ties go to the lowest id.
    pub fn argmax_at(&self, x: f64, y: f64) -> usize {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for c in 0..self.num_classes {
            let v = self.value(c, x, y);
            if v > best_v {
                best = c;
                best_v = v;
            }
        }
        best
    }
}

/// Builds class-wise spatial priors from source labels at the default
/// raster resolution.
pub fn build_spatial_prior(
    labels: &[LabelMap],
    num_classes: usize,
    bandwidth: f64,
) -> Result<SpatialPrior> {
    build_spatial_prior_with_resolution(labels, num_classes, bandwidth, PRIOR_RESOLUTION)
}

pub fn build_spatial_prior_with_resolution(
    labels: &[LabelMap],
    num_classes: usize,
    bandwidth: f64,
    resolution: usize,
) -> Result<SpatialPrior> {
    if labels.is_empty() {
        return Err(BdmError::data("spatial prior needs at least one label map"));
    }
    if !bandwidth.is_finite() || bandwidth < 0.0 {
        return Err(BdmError::config(format!(
            "bandwidth must be >= 0, got {bandwidth}"
        )));
    }
    if resolution == 0 {
        return Err(BdmError::config("prior resolution must be positive"));
    }
    let cells = resolution * resolution;
    // slot `num_classes` holds the all-pixel totals
    let planes = num_classes + 1;

    let binned = labels
        .par_iter()
        .map(|label| bin_label(label, num_classes, resolution))
        .reduce(
            || vec![0u64; planes * cells],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let kernel = gaussian_weights(bandwidth * resolution as f64, resolution);
    let smoothed: Vec<Vec<f64>> = (0..planes)
        .into_par_iter()
        .map(|p| {
            let plane: Vec<f64> = binned[p * cells..(p + 1) * cells]
                .iter()
                .map(|&v| v as f64)
                .collect();
            smooth(&plane, &kernel, resolution)
        })
        .collect();

    let totals = &smoothed[num_classes];
    let mut values = Vec::with_capacity(num_classes * cells);
    let mut empty = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let occurred = binned[c * cells..(c + 1) * cells].iter().any(|&v| v > 0);
        empty.push(!occurred);
        values.extend(smoothed[c].iter().zip(totals).map(|(&n, &d)| {
            if occurred && d > 0.0 {
                n / d
            } else {
                0.0
            }
        }));
    }
    Ok(SpatialPrior {
        num_classes,
        resolution,
        bandwidth,
        values,
        empty,
    })
}

fn bin_label(label: &LabelMap, num_classes: usize, res: usize) -> Vec<u64> {
    let cells = res * res;
    let mut out = vec![0u64; (num_classes + 1) * cells];
    let (w, h) = (label.width() as usize, label.height() as usize);
    // bin index of each column / row center
    let bx: Vec<usize> = (0..w).map(|x| ((2 * x + 1) * res) / (2 * w)).collect();
    let by: Vec<usize> = (0..h).map(|y| ((2 * y + 1) * res) / (2 * h)).collect();
    for (y, &row_bin) in by.iter().enumerate() {
        for (x, &col_bin) in bx.iter().enumerate() {
            let cell = row_bin * res + col_bin;
            out[num_classes * cells + cell] += 1;
            let c = label.data()[y * w + x] as usize;
            if c < num_classes {
                out[c * cells + cell] += 1;
            }
        }
    }
    out
}

/// Gaussian weights indexed by absolute node offset; sigma 0 is the identity.
fn gaussian_weights(sigma: f64, res: usize) -> Vec<f64> {
    (0..res)
        .map(|d| {
            if sigma == 0.0 {
                if d == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let d = d as f64;
                (-d * d / (2.0 * sigma * sigma)).exp()
            }
        })
        .collect()
}

fn smooth(plane: &[f64], kernel: &[f64], res: usize) -> Vec<f64> {
    let mut rows = vec![0.0; plane.len()];
    for y in 0..res {
        for x in 0..res {
            rows[y * res + x] = (0..res)
                .map(|j| kernel[x.abs_diff(j)] * plane[y * res + j])
                .sum();
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..res {
        for x in 0..res {
            out[y * res + x] = (0..res)
                .map(|j| kernel[y.abs_diff(j)] * rows[j * res + x])
                .sum();
        }
    }
    out
}
