//! Region cutout: plain masked cutout and the confidence-driven variant that
//! only drops grid cells dominated by uncertain (IGNORE) pixels.
//!
//! Cutting zeroes image pixels and sets labels to IGNORE. Setting labels to 0
//! would silently turn dropped pixels into class 0.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BdmError, Result};
use crate::types::{GridSpec, LabelMap, Rect, Sample, IGNORE};

/// Cells examined by a confidence cutout and the ones actually dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPlan {
    /// Candidate cells in draw order.
    pub candidates: Vec<usize>,
    /// Uncertain ratio per candidate, parallel to `candidates`.
    pub ratios: Vec<f64>,
    /// Candidates whose ratio exceeded the threshold, in draw order.
    pub cut_cells: Vec<usize>,
}

impl CutPlan {
    pub fn empty() -> Self {
        Self {
            candidates: Vec::new(),
            ratios: Vec::new(),
            cut_cells: Vec::new(),
        }
    }

    pub fn is_cut(&self, cell: usize) -> bool {
        self.cut_cells.contains(&cell)
    }
}

/// Fraction of IGNORE pixels in `rect`.
pub fn uncertain_ratio(label: &LabelMap, rect: &Rect) -> Result<f64> {
    if rect.is_empty() {
        return Err(BdmError::data("uncertain ratio of an empty rect"));
    }
    if !rect.fits_in(label.width(), label.height()) {
        return Err(BdmError::OutOfRange(format!(
            "rect {rect:?} exceeds {}x{} label",
            label.width(),
            label.height()
        )));
    }
    let ignored = label.iter_rect(rect).filter(|&v| v == IGNORE).count();
    Ok(ignored as f64 / rect.area() as f64)
}

/// Binary keep-mask: `true` keeps a pixel, `false` drops it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeepMask {
    width: u32,
    height: u32,
    keep: Vec<bool>,
}

impl KeepMask {
    pub fn all(width: u32, height: u32, keep: bool) -> Self {
        Self {
            width,
            height,
            keep: vec![keep; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != width as usize * height as usize {
            return Err(BdmError::data("mask length does not match its dimensions"));
        }
        Ok(Self {
            width,
            height,
            keep,
        })
    }

    /// Mask dropping the given rects.
    pub fn dropping(width: u32, height: u32, rects: &[Rect]) -> Result<Self> {
        let mut m = Self::all(width, height, true);
        for r in rects {
            if !r.fits_in(width, height) {
                return Err(BdmError::OutOfRange(format!("rect {r:?} outside mask")));
            }
            for y in r.y..r.bottom() {
                let row = y as usize * width as usize;
                m.keep[row + r.x as usize..row + r.right() as usize].fill(false);
            }
        }
        Ok(m)
    }

    /// Mask dropping `count` random `box_w x box_h` rectangles (they may overlap).
    pub fn random_boxes<R: Rng + ?Sized>(
        width: u32,
        height: u32,
        box_w: u32,
        box_h: u32,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if box_w == 0 || box_h == 0 || box_w > width || box_h > height {
            return Err(BdmError::config(format!(
                "box {box_w}x{box_h} does not fit a {width}x{height} image"
            )));
        }
        let rects: Vec<Rect> = (0..count)
            .map(|_| {
                Rect::new(
                    rng.random_range(0..=width - box_w),
                    rng.random_range(0..=height - box_h),
                    box_w,
                    box_h,
                )
            })
            .collect();
        Self::dropping(width, height, &rects)
    }

    pub fn keeps(&self, i: usize) -> bool {
        self.keep[i]
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Applies a keep-mask: dropped pixels become black with IGNORE labels and
/// zero confidence.
pub fn random_cutout(sample: &Sample, mask: &KeepMask) -> Result<Sample> {
    sample.ensure_aligned()?;
    if mask.dims() != sample.label.dims() {
        return Err(BdmError::data(format!(
            "mask {:?} does not match sample {:?}",
            mask.dims(),
            sample.label.dims()
        )));
    }
    let mut out = sample.clone();
    let image = out.image.data_mut();
    for (i, px) in image.chunks_exact_mut(3).enumerate() {
        if !mask.keeps(i) {
            px.fill(0);
        }
    }
    for (i, v) in out.label.data_mut().iter_mut().enumerate() {
        if !mask.keeps(i) {
            *v = IGNORE;
        }
    }
    if let Some(conf) = out.confidence.as_mut() {
        for (i, v) in conf.data_mut().iter_mut().enumerate() {
            if !mask.keeps(i) {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

/// Drops whole grid cells in place.
pub fn cut_cells(sample: &mut Sample, grid: &GridSpec, cells: &[usize]) -> Result<()> {
    for &cell in cells {
        let rect = grid.cell_rect(cell);
        sample.image.fill_rect(&rect, 0)?;
        sample.label.fill_rect(&rect, IGNORE)?;
        if let Some(conf) = sample.confidence.as_mut() {
            conf.fill_rect(&rect, 0.0)?;
        }
    }
    Ok(())
}

/// Draws `num_boxes` distinct candidate cells and cuts those whose uncertain
/// ratio is strictly above `gamma`.
pub fn confidence_cutout<R: Rng + ?Sized>(
    sample: &Sample,
    grid: &GridSpec,
    gamma: f64,
    num_boxes: usize,
    rng: &mut R,
) -> Result<(Sample, CutPlan)> {
    sample.ensure_aligned()?;
    let cells = grid.cell_count();
    if num_boxes > cells {
        return Err(BdmError::config(format!(
            "{num_boxes} cut boxes requested on a {cells}-cell grid"
        )));
    }
    let (cw, ch) = grid.covered_size();
    if sample.width() < cw || sample.height() < ch {
        return Err(BdmError::data(format!(
            "sample {} is smaller than its grid",
            sample.id
        )));
    }
    let candidates = rand::seq::index::sample(rng, cells, num_boxes).into_vec();
    let ratios = candidates
        .iter()
        .map(|&c| uncertain_ratio(&sample.label, &grid.cell_rect(c)))
        .collect::<Result<Vec<_>>>()?;
    let cut: Vec<usize> = candidates
        .iter()
        .zip(&ratios)
        .filter(|(_, &r)| r > gamma)
        .map(|(&c, _)| c)
        .collect();
    let mut out = sample.clone();
    cut_cells(&mut out, grid, &cut)?;
    Ok((
        out,
        CutPlan {
            candidates,
            ratios,
            cut_cells: cut,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ConfidenceMap, Image};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn textured(w: u32, h: u32, label: Vec<u8>) -> Sample {
        let mut img = Image::filled(w, h, [0, 0, 0]);
        for y in 0..h {
            for x in 0..w {
                img.put_pixel(x, y, [x as u8 + 1, y as u8 + 1, 7]);
            }
        }
        Sample::new("t", img, LabelMap::from_vec(w, h, label).unwrap(), None).unwrap()
    }

    #[test]
    fn ratio_extremes_and_count() {
        let all = LabelMap::filled(4, 4, IGNORE);
        let none = LabelMap::filled(4, 4, 2);
        let r = Rect::new(0, 0, 4, 4);
        assert_eq!(uncertain_ratio(&all, &r).unwrap(), 1.0);
        assert_eq!(uncertain_ratio(&none, &r).unwrap(), 0.0);
        let mut three = LabelMap::filled(4, 4, 1);
        three.set(0, 0, IGNORE);
        three.set(3, 1, IGNORE);
        three.set(2, 3, IGNORE);
        assert_eq!(uncertain_ratio(&three, &r).unwrap(), 3.0 / 16.0);
        assert_eq!(uncertain_ratio(&three, &r).unwrap(), 0.1875);
        assert!(uncertain_ratio(&three, &Rect::new(0, 0, 0, 2)).is_err());
        assert!(uncertain_ratio(&three, &Rect::new(2, 2, 3, 3)).is_err());
    }

    #[test]
    fn mask_identity_and_full_drop() {
        let s = textured(3, 2, vec![0, 1, 2, 0, 1, 2]);
        assert_eq!(random_cutout(&s, &KeepMask::all(3, 2, true)).unwrap(), s);
        let dropped = random_cutout(&s, &KeepMask::all(3, 2, false)).unwrap();
        assert!(dropped.image.data().iter().all(|&v| v == 0));
        assert!(dropped.label.data().iter().all(|&v| v == IGNORE));
        assert!(random_cutout(&s, &KeepMask::all(2, 2, true)).is_err());
    }

    #[test]
    fn checkerboard_matches_pixel_select() {
        let mut s = textured(4, 3, (0..12).map(|i| (i % 3) as u8).collect());
        s.confidence = Some(ConfidenceMap::filled(4, 3, 0.5));
        let keep: Vec<bool> = (0..12).map(|i| ((i % 4) + (i / 4)) % 2 == 0).collect();
        let out = random_cutout(&s, &KeepMask::from_vec(4, 3, keep.clone()).unwrap()).unwrap();
        for y in 0..3 {
            for x in 0..4 {
                let i = (y * 4 + x) as usize;
                if keep[i] {
                    assert_eq!(out.image.pixel(x, y), s.image.pixel(x, y));
                    assert_eq!(out.label.get(x, y), s.label.get(x, y));
                } else {
                    assert_eq!(out.image.pixel(x, y), [0, 0, 0]);
                    assert_eq!(out.label.get(x, y), IGNORE);
                    assert_eq!(out.confidence.as_ref().unwrap().get(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn confident_sample_is_never_cut() {
        let s = textured(8, 6, vec![1; 48]);
        let g = GridSpec::for_image(8, 6, 4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (out, plan) = confidence_cutout(&s, &g, 0.2, 4, &mut rng).unwrap();
        assert_eq!(plan.candidates.len(), 4);
        assert!(plan.cut_cells.is_empty());
        assert_eq!(out, s);
    }

    #[test]
    fn fully_ignored_candidate_is_cut() {
        let mut label = vec![1u8; 48];
        let g = GridSpec::for_image(8, 6, 4, 3).unwrap();
        let target = g.cell_rect(6);
        for y in target.y..target.bottom() {
            for x in target.x..target.right() {
                label[(y * 8 + x) as usize] = IGNORE;
            }
        }
        let s = textured(8, 6, label);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // every cell is a candidate
        let (out, plan) = confidence_cutout(&s, &g, 0.2, 12, &mut rng).unwrap();
        assert_eq!(plan.cut_cells, vec![6]);
        assert_eq!(out.image.pixel(target.x, target.y), [0, 0, 0]);
    }

    #[test]
    fn too_many_boxes_is_a_config_error() {
        let s = textured(8, 6, vec![1; 48]);
        let g = GridSpec::for_image(8, 6, 4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = confidence_cutout(&s, &g, 0.2, 13, &mut rng).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn candidates_are_distinct_and_reproducible() {
        let s = textured(8, 6, vec![IGNORE; 48]);
        let g = GridSpec::for_image(8, 6, 4, 3).unwrap();
        for seed in 0..50 {
            let (_, a) =
                confidence_cutout(&s, &g, 0.2, 4, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let (_, b) =
                confidence_cutout(&s, &g, 0.2, 4, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a, b);
            let mut c = a.candidates.clone();
            c.sort_unstable();
            c.dedup();
            assert_eq!(c.len(), 4);
        }
    }
}
