//! Pseudo-label generation from per-pixel class probabilities.
//!
//! A pixel keeps its argmax class only when the winning probability reaches
//! that class's threshold; otherwise it becomes [`IGNORE`]. The confidence
//! plane always records the winning probability.
//!
//! Thresholds are either one fixed value or per-class quantiles of the
//! winning probabilities over a dataset, capped at [`QUANTILE_CAP`]. This is
//! the usual self-training recipe; callers with their own rule can pass
//! explicit per-class thresholds instead.

use serde::{Deserialize, Serialize};

use crate::error::{BdmError, Result};
use crate::types::{ConfidenceMap, LabelMap, IGNORE, MAX_CLASSES};

/// Upper bound on any fitted per-class threshold, and the threshold used for
/// classes that are never predicted.
pub const QUANTILE_CAP: f64 = 0.9;

/// Default tolerance on the per-pixel probability sum.
pub const SUM_TOLERANCE: f64 = 1e-4;

/// `K` planes of class probabilities, stored plane-major (`[class][y][x]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: u32,
    height: u32,
    num_classes: usize,
    data: Vec<f32>,
}

impl ProbabilityMap {
    /// Wraps a plane-major buffer after checking its length. Value checks are
    /// left to [`ProbabilityMap::validate`].
    pub fn new(width: u32, height: u32, num_classes: usize, data: Vec<f32>) -> Result<Self> {
        if num_classes == 0 || num_classes > MAX_CLASSES {
            return Err(BdmError::data(format!(
                "probability map declares {num_classes} classes"
            )));
        }
        let expected = width as usize * height as usize * num_classes;
        if data.len() != expected {
            return Err(BdmError::data(format!(
                "probability map {width}x{height}x{num_classes} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            num_classes,
            data,
        })
    }

    /// Builds a map from per-pixel probability vectors given in row-major
    /// pixel order.
    pub fn from_pixels(width: u32, height: u32, pixels: &[Vec<f32>]) -> Result<Self> {
        let n = width as usize * height as usize;
        if pixels.len() != n {
            return Err(BdmError::data("pixel count does not match dimensions"));
        }
        let k = pixels.first().map_or(0, Vec::len);
        let mut data = vec![0.0; n * k];
        for (p, probs) in pixels.iter().enumerate() {
            if probs.len() != k {
                return Err(BdmError::data("ragged probability vectors"));
            }
            for (c, &v) in probs.iter().enumerate() {
                data[c * n + p] = v;
            }
        }
        Self::new(width, height, k, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn plane(&self, class: usize) -> &[f32] {
        let n = self.pixel_count();
        &self.data[class * n..(class + 1) * n]
    }

    pub fn prob(&self, pixel: usize, class: usize) -> f32 {
        self.data[class * self.pixel_count() + pixel]
    }

    /// Rejects negative or >1 values and pixels whose probabilities do not sum
    /// to 1 within `tolerance`.
    pub fn validate(&self, tolerance: f64) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            let n = self.pixel_count();
            return Err(BdmError::data(format!(
                "probability {} at pixel {} class {} is outside [0, 1]",
                self.data[i],
                i % n,
                i / n
            )));
        }
        for p in 0..self.pixel_count() {
            let sum: f64 = (0..self.num_classes).map(|c| self.prob(p, c) as f64).sum();
            if (sum - 1.0).abs() > tolerance {
                return Err(BdmError::data(format!(
                    "probabilities at pixel {p} sum to {sum}, expected 1 within {tolerance}"
                )));
            }
        }
        Ok(())
    }

    /// Winning class and its probability; ties go to the lowest class id.
    pub fn argmax(&self, pixel: usize) -> (u8, f32) {
        let mut best = 0usize;
        let mut best_p = self.prob(pixel, 0);
        for c in 1..self.num_classes {
            let p = self.prob(pixel, c);
            if p > best_p {
                best = c;
                best_p = p;
            }
        }
        (best as u8, best_p)
    }
}

/// How pseudo-label thresholds are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    Fixed { threshold: f64 },
    PerClassQuantile { quantile: f64 },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self::PerClassQuantile { quantile: 0.5 }
    }
}

/// Thresholds a probability map into a pseudo label and confidence plane.
///
/// Explicit `class_thresholds` take precedence over the policy. Without them a
/// `PerClassQuantile` policy fits thresholds on this map alone.
pub fn pseudo_label(
    prob: &ProbabilityMap,
    policy: ThresholdPolicy,
    class_thresholds: Option<&[f64]>,
) -> Result<(LabelMap, ConfidenceMap)> {
    prob.validate(SUM_TOLERANCE)?;
    pseudo_label_prevalidated(prob, policy, class_thresholds)
}

/// As [`pseudo_label`], for maps the caller has already validated (possibly
/// with a looser tolerance, e.g. for quantized inputs).
pub fn pseudo_label_prevalidated(
    prob: &ProbabilityMap,
    policy: ThresholdPolicy,
    class_thresholds: Option<&[f64]>,
) -> Result<(LabelMap, ConfidenceMap)> {
    let k = prob.num_classes();
    let thresholds: Vec<f64> = match (class_thresholds, policy) {
        (Some(t), _) => {
            if t.len() != k {
                return Err(BdmError::config(format!(
                    "{} class thresholds given for {k} classes",
                    t.len()
                )));
            }
            t.to_vec()
        }
        (None, ThresholdPolicy::Fixed { threshold }) => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(BdmError::config(format!(
                    "fixed threshold {threshold} outside [0, 1]"
                )));
            }
            vec![threshold; k]
        }
        (None, ThresholdPolicy::PerClassQuantile { quantile }) => {
            let mut fitter = ThresholdFitter::new(k, quantile)?;
            fitter.observe_pass1(prob)?;
            fitter.finish_pass1();
            fitter.observe_pass2(prob)?;
            fitter.finish()
        }
    };

    let n = prob.pixel_count();
    let mut labels = Vec::with_capacity(n);
    let mut conf = Vec::with_capacity(n);
    for p in 0..n {
        let (class, best) = prob.argmax(p);
        labels.push(if best as f64 >= thresholds[class as usize] {
            class
        } else {
            IGNORE
        });
        conf.push(best);
    }
    Ok((
        LabelMap::from_vec(prob.width(), prob.height(), labels)?,
        ConfidenceMap::from_vec(prob.width(), prob.height(), conf)?,
    ))
}

/// Fits per-class thresholds over a dataset held in memory.
pub fn fit_class_thresholds(dataset: &[ProbabilityMap], quantile: f64) -> Result<Vec<f64>> {
    let first = dataset
        .first()
        .ok_or_else(|| BdmError::data("cannot fit thresholds on an empty dataset"))?;
    let mut fitter = ThresholdFitter::new(first.num_classes(), quantile)?;
    for map in dataset {
        fitter.observe_pass1(map)?;
    }
    fitter.finish_pass1();
    for map in dataset {
        fitter.observe_pass2(map)?;
    }
    Ok(fitter.finish())
}

// f32 values in [0, 1] have bit patterns <= 0x3F80_0000, monotone in value.
const BIN_SHIFT: u32 = 16;
const NUM_BINS: usize = (0x3F80_0000u32 >> BIN_SHIFT) as usize + 1;

fn bin_of(v: f32) -> usize {
    // -0.0 would land in the sign-bit range
    let v = if v == 0.0 { 0.0f32 } else { v };
    (v.to_bits() >> BIN_SHIFT) as usize
}

#[derive(Debug, Clone)]
struct RankTarget {
    position: f64,
    lo: u64,
    hi: u64,
    // (bin, rank of the first value in that bin) for lo and hi
    lo_bin: (usize, u64),
    hi_bin: (usize, u64),
}

/// Exact streaming quantile fit in two passes.
///
/// Pass one builds a coarse per-class histogram over the f32 bit patterns of
/// the winning probabilities. Pass two keeps only values in the bins that hold
/// the needed order statistics. Results are exact and independent of the
/// order maps are fed in, with memory bounded by the histogram plus the
/// contents of at most two bins per class.
#[derive(Debug, Clone)]
pub struct ThresholdFitter {
    num_classes: usize,
    quantile: f64,
    histogram: Vec<u64>,
    targets: Vec<Option<RankTarget>>,
    kept: Vec<Vec<f32>>,
    pass: u8,
}

impl ThresholdFitter {
    pub fn new(num_classes: usize, quantile: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&quantile) {
            return Err(BdmError::config(format!(
                "quantile must lie in [0, 1], got {quantile}"
            )));
        }
        Ok(Self {
            num_classes,
            quantile,
            histogram: vec![0; num_classes * NUM_BINS],
            targets: vec![None; num_classes],
            kept: vec![Vec::new(); num_classes],
            pass: 1,
        })
    }

    fn check(&self, map: &ProbabilityMap, pass: u8) -> Result<()> {
        if self.pass != pass {
            return Err(BdmError::Invariant(format!(
                "threshold fitter fed pass-{pass} data while in pass {}",
                self.pass
            )));
        }
        if map.num_classes() != self.num_classes {
            return Err(BdmError::data(format!(
                "probability map has {} classes, expected {}",
                map.num_classes(),
                self.num_classes
            )));
        }
        Ok(())
    }

    pub fn observe_pass1(&mut self, map: &ProbabilityMap) -> Result<()> {
        self.check(map, 1)?;
        for p in 0..map.pixel_count() {
            let (c, v) = map.argmax(p);
            self.histogram[c as usize * NUM_BINS + bin_of(v)] += 1;
        }
        Ok(())
    }

    pub fn finish_pass1(&mut self) {
        for c in 0..self.num_classes {
            let hist = &self.histogram[c * NUM_BINS..(c + 1) * NUM_BINS];
            let total: u64 = hist.iter().sum();
            if total == 0 {
                continue;
            }
            let position = self.quantile * (total - 1) as f64;
            let lo = position.floor() as u64;
            let hi = position.ceil() as u64;
            let locate = |rank: u64| {
                let mut before = 0u64;
                for (b, &count) in hist.iter().enumerate() {
                    if rank < before + count {
                        return (b, before);
                    }
                    before += count;
                }
                unreachable!("rank {rank} beyond histogram total {total}")
            };
            self.targets[c] = Some(RankTarget {
                position,
                lo,
                hi,
                lo_bin: locate(lo),
                hi_bin: locate(hi),
            });
        }
        self.pass = 2;
    }

    pub fn observe_pass2(&mut self, map: &ProbabilityMap) -> Result<()> {
        self.check(map, 2)?;
        for p in 0..map.pixel_count() {
            let (c, v) = map.argmax(p);
            if let Some(t) = &self.targets[c as usize] {
                let b = bin_of(v);
                if b == t.lo_bin.0 || b == t.hi_bin.0 {
                    self.kept[c as usize].push(v);
                }
            }
        }
        Ok(())
    }

    /// Per-class thresholds, each capped at [`QUANTILE_CAP`].
    pub fn finish(mut self) -> Vec<f64> {
        (0..self.num_classes)
            .map(|c| {
                let Some(t) = &self.targets[c] else {
                    return QUANTILE_CAP;
                };
                let kept = &mut self.kept[c];
                kept.sort_by(f32::total_cmp);
                // kept holds the lo bin then (if different) the hi bin, both sorted
                let lo_offset = (t.lo - t.lo_bin.1) as usize;
                let hi_offset = if t.hi_bin.0 == t.lo_bin.0 {
                    (t.hi - t.lo_bin.1) as usize
                } else {
                    let lo_bin_len = kept.iter().filter(|v| bin_of(**v) == t.lo_bin.0).count();
                    lo_bin_len + (t.hi - t.hi_bin.1) as usize
                };
                let v_lo = kept[lo_offset] as f64;
                let v_hi = kept[hi_offset] as f64;
                let q = v_lo + (t.position - t.lo as f64) * (v_hi - v_lo);
                q.min(QUANTILE_CAP)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class(pixels: &[(f32, f32)]) -> ProbabilityMap {
        let v: Vec<Vec<f32>> = pixels.iter().map(|&(a, b)| vec![a, b]).collect();
        ProbabilityMap::from_pixels(pixels.len() as u32, 1, &v).unwrap()
    }

    // Type-7 (linear interpolation) quantile over a full sorted list.
    fn oracle_quantile(mut v: Vec<f32>, q: f64) -> f64 {
        v.sort_by(f32::total_cmp);
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] as f64 + (pos - lo as f64) * (v[hi] as f64 - v[lo] as f64)
    }

    #[test]
    fn above_fixed_threshold_keeps_label() {
        let (l, c) = pseudo_label(
            &two_class(&[(0.95, 0.05)]),
            ThresholdPolicy::Fixed { threshold: 0.9 },
            None,
        )
        .unwrap();
        assert_eq!(l.data(), &[0]);
        assert_eq!(c.data(), &[0.95]);
    }

    #[test]
    fn below_fixed_threshold_is_ignored() {
        let (l, c) = pseudo_label(
            &two_class(&[(0.6, 0.4)]),
            ThresholdPolicy::Fixed { threshold: 0.9 },
            None,
        )
        .unwrap();
        assert_eq!(l.data(), &[IGNORE]);
        assert_eq!(c.data(), &[0.6]);
    }

    #[test]
    fn argmax_ties_go_to_lowest_class() {
        let (l, _) = pseudo_label(
            &two_class(&[(0.5, 0.5)]),
            ThresholdPolicy::Fixed { threshold: 0.0 },
            None,
        )
        .unwrap();
        assert_eq!(l.data(), &[0]);
    }

    #[test]
    fn invalid_maps_are_rejected() {
        assert!(pseudo_label(&two_class(&[(0.7, 0.7)]), ThresholdPolicy::default(), None).is_err());
        assert!(
            pseudo_label(&two_class(&[(1.2, -0.2)]), ThresholdPolicy::default(), None).is_err()
        );
    }

    #[test]
    fn median_quantile_ignores_lower_half() {
        // 100 class-0 pixels with confidences spread uniformly over [0.5, 1]
        // (argmax stays class 0) in scrambled order.
        let confs: Vec<f32> = (0..100)
            .map(|i| 0.5 + 0.5 * ((i * 37) % 100) as f32 / 99.0)
            .collect();
        let pixels: Vec<(f32, f32)> = confs.iter().map(|&c| (c, 1.0 - c)).collect();
        let (l, _) = pseudo_label(
            &two_class(&pixels),
            ThresholdPolicy::PerClassQuantile { quantile: 0.5 },
            None,
        )
        .unwrap();
        let median = oracle_quantile(confs.clone(), 0.5);
        for (label, conf) in l.data().iter().zip(&confs) {
            assert_eq!(*label == IGNORE, (*conf as f64) < median);
        }
        let ignored = l.data().iter().filter(|&&v| v == IGNORE).count();
        assert_eq!(ignored, 50);
    }

    #[test]
    fn constant_confidence_threshold() {
        let map = two_class(&[(0.8, 0.2); 16]);
        let t = fit_class_thresholds(&[map], 0.5).unwrap();
        assert!((t[0] - 0.8f32 as f64).abs() < 1e-12);
        assert_eq!(t[1], QUANTILE_CAP);
    }

    #[test]
    fn unseen_class_falls_back_to_cap() {
        let v = vec![vec![0.7, 0.1, 0.1, 0.1]; 4];
        let map = ProbabilityMap::from_pixels(2, 2, &v).unwrap();
        let t = fit_class_thresholds(&[map], 0.3).unwrap();
        assert_eq!(t[3], 0.9);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(fit_class_thresholds(&[], 0.5).is_err());
    }

    #[test]
    fn fitted_thresholds_match_brute_force_quantiles() {
        // class 0 wins with these confidences; class 1 wins with the rest
        let c0 = [0.55f32, 0.97, 0.61, 0.83, 0.74, 0.99, 0.66];
        let c1 = [0.52f32, 0.58, 0.93, 0.71];
        let mut pixels: Vec<(f32, f32)> = c0.iter().map(|&c| (c, 1.0 - c)).collect();
        pixels.extend(c1.iter().map(|&c| (1.0 - c, c)));
        let maps = vec![two_class(&pixels[..5]), two_class(&pixels[5..])];
        for q in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let t = fit_class_thresholds(&maps, q).unwrap();
            let e0 = oracle_quantile(c0.to_vec(), q).min(0.9);
            let e1 = oracle_quantile(c1.to_vec(), q).min(0.9);
            assert!((t[0] - e0).abs() < 1e-12, "q={q}: {} vs {e0}", t[0]);
            assert!((t[1] - e1).abs() < 1e-12, "q={q}: {} vs {e1}", t[1]);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_map() -> impl Strategy<Value = ProbabilityMap> {
            (1u32..6, 1u32..6, 2usize..5).prop_flat_map(|(w, h, k)| {
                prop::collection::vec(prop::collection::vec(0.01f32..1.0, k), (w * h) as usize)
                    .prop_map(move |raw| {
                        let pixels: Vec<Vec<f32>> = raw
                            .into_iter()
                            .map(|v| {
                                let s: f32 = v.iter().sum();
                                v.iter().map(|x| x / s).collect()
                            })
                            .collect();
                        ProbabilityMap::from_pixels(w, h, &pixels).unwrap()
                    })
            })
        }

        proptest! {
            #[test]
            fn raising_fixed_threshold_never_unignores(map in arb_map(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let (l_lo, _) = pseudo_label(&map, ThresholdPolicy::Fixed { threshold: lo }, None).unwrap();
                let (l_hi, _) = pseudo_label(&map, ThresholdPolicy::Fixed { threshold: hi }, None).unwrap();
                for (x, y) in l_lo.data().iter().zip(l_hi.data()) {
                    if *x == IGNORE {
                        prop_assert_eq!(*y, IGNORE);
                    }
                }
            }

            #[test]
            fn labels_respect_thresholds_and_argmax(map in arb_map(), q in 0.0f64..1.0) {
                let t = fit_class_thresholds(std::slice::from_ref(&map), q).unwrap();
                let (l, c) = pseudo_label(&map, ThresholdPolicy::PerClassQuantile { quantile: q }, Some(&t)).unwrap();
                for p in 0..map.pixel_count() {
                    let (arg, best) = map.argmax(p);
                    prop_assert_eq!(c.data()[p], best);
                    let label = l.data()[p];
                    if label == IGNORE {
                        prop_assert!((best as f64) < t[arg as usize]);
                    } else {
                        prop_assert_eq!(label, arg);
                        prop_assert!((best as f64) >= t[arg as usize]);
                    }
                }
            }

            #[test]
            fn fit_is_order_independent(maps in prop::collection::vec(arb_map(), 1..4), q in 0.0f64..1.0) {
                let k = maps[0].num_classes();
                prop_assume!(maps.iter().all(|m| m.num_classes() == k));
                let forward = fit_class_thresholds(&maps, q).unwrap();
                let mut rev = maps.clone();
                rev.reverse();
                prop_assert_eq!(forward, fit_class_thresholds(&rev, q).unwrap());
            }
        }
    }
}
