//! Domain-wise patch banks.
//!
//! Every sample is divided into a `cols x rows` grid. Each cell becomes a
//! patch scored by its class-normalized confidence. For every (cell, class)
//! pair, the patches containing that class are sorted by score and split into
//! `R` equal-count confidence groups, giving `cols * rows * K * R` sequences.
//!
//! The bank only stores references (sample id, cell, score, classes); pixel
//! data is fetched through a [`CropSource`] when a patch is pasted.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BdmError, Result};
use crate::types::{ConfidenceMap, GridSpec, Image, LabelMap, Rect, Sample, IGNORE};

/// Score given to patches without any labeled pixel.
pub const EMPTY_PATCH_SCORE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn other(self) -> Self {
        match self {
            Self::Source => Self::Target,
            Self::Target => Self::Source,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Source => "S",
            Self::Target => "T",
        }
    }
}

/// A grid cell cut from a sample, before scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPatch {
    pub sample_id: String,
    pub cell_index: usize,
    pub rect: Rect,
    pub image: Image,
    pub label: LabelMap,
    pub confidence: Option<ConfidenceMap>,
}

/// A scored patch with its pixel data.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub sample_id: String,
    pub cell_index: usize,
    pub rect: Rect,
    pub image_crop: Image,
    pub label_crop: LabelMap,
    pub norm_conf: f64,
    pub classes_present: Vec<u8>,
}

/// Splits a sample into its grid cells, row-major.
pub fn divide(sample: &Sample, grid: &GridSpec) -> Result<Vec<RawPatch>> {
    sample.ensure_aligned()?;
    let (cw, ch) = grid.covered_size();
    if sample.width() < cw || sample.height() < ch {
        return Err(BdmError::data(format!(
            "sample {} is {}x{}, smaller than the {}x{} grid area",
            sample.id,
            sample.width(),
            sample.height(),
            cw,
            ch
        )));
    }
    grid.cell_rects()
        .enumerate()
        .map(|(cell_index, rect)| {
            Ok(RawPatch {
                sample_id: sample.id.clone(),
                cell_index,
                rect,
                image: sample.image.crop(&rect)?,
                label: sample.label.crop(&rect)?,
                confidence: sample
                    .confidence
                    .as_ref()
                    .map(|c| c.crop(&rect))
                    .transpose()?,
            })
        })
        .collect()
}

/// Mean over labeled pixels of `confidence - difficulty[class]`;
/// [`EMPTY_PATCH_SCORE`] when nothing is labeled. A missing confidence plane
/// reads as 1.0.
pub fn normalized_confidence(
    label: &LabelMap,
    confidence: Option<&ConfidenceMap>,
    difficulty: &[f64],
) -> f64 {
    let mut sum = 0.0;
    let mut n = 0u64;
    for (i, &c) in label.data().iter().enumerate() {
        if c == IGNORE || c as usize >= difficulty.len() {
            continue;
        }
        let conf = confidence.map_or(1.0, |m| m.data()[i] as f64);
        sum += conf - difficulty[c as usize];
        n += 1;
    }
    if n == 0 {
        EMPTY_PATCH_SCORE
    } else {
        sum / n as f64
    }
}

fn classes_in(label: &LabelMap, num_classes: usize) -> Vec<u8> {
    label
        .classes_present()
        .into_iter()
        .filter(|&c| (c as usize) < num_classes)
        .collect()
}

impl RawPatch {
    pub fn into_patch(self, difficulty: &[f64]) -> Patch {
        let norm_conf = normalized_confidence(&self.label, self.confidence.as_ref(), difficulty);
        let classes_present = classes_in(&self.label, difficulty.len());
        Patch {
            sample_id: self.sample_id,
            cell_index: self.cell_index,
            rect: self.rect,
            image_crop: self.image,
            label_crop: self.label,
            norm_conf,
            classes_present,
        }
    }
}

/// What the bank keeps per patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub sample_id: String,
    pub cell: u32,
    pub score: f64,
    pub classes: Vec<u8>,
}

pub type PatchId = u32;

/// Address of one patch sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeqKey {
    pub cell: usize,
    pub class: usize,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchBank {
    pub domain: Domain,
    pub grid: GridSpec,
    pub image_size: (u32, u32),
    pub num_classes: usize,
    pub conf_groups: usize,
    patches: Vec<PatchEntry>,
    sequences: Vec<Vec<PatchId>>,
    /// Per (cell, class): lowest score of groups `1..R`, `None` when that group
    /// is empty.
    boundaries: Vec<Vec<Option<f64>>>,
}

/// Sizes of an equal-count split of `n` items into `r` groups; the first
/// `n % r` groups take one extra item.
pub fn split_sizes(n: usize, r: usize) -> Vec<usize> {
    let base = n / r;
    let extra = n % r;
    (0..r).map(|g| base + usize::from(g < extra)).collect()
}

impl PatchBank {
    /// Scores every cell of every sample and indexes the patches.
    ///
    /// All samples must share one size, which the grid must fit.
    pub fn build(
        domain: Domain,
        dataset: &[Sample],
        grid: GridSpec,
        num_classes: usize,
        conf_groups: usize,
        difficulty: &[f64],
    ) -> Result<Self> {
        let first = dataset
            .first()
            .ok_or_else(|| BdmError::data("cannot build a patch bank from an empty dataset"))?;
        if conf_groups == 0 {
            return Err(BdmError::config("conf_groups must be at least 1"));
        }
        if difficulty.len() != num_classes {
            return Err(BdmError::data(format!(
                "difficulty has {} entries for {num_classes} classes",
                difficulty.len()
            )));
        }
        let image_size = (first.width(), first.height());
        if let Some(s) = dataset
            .iter()
            .find(|s| (s.width(), s.height()) != image_size)
        {
            return Err(BdmError::data(format!(
                "sample {} is {}x{} but the bank holds {}x{} images",
                s.id,
                s.width(),
                s.height(),
                image_size.0,
                image_size.1
            )));
        }

        let per_sample: Vec<Vec<PatchEntry>> = dataset
            .par_iter()
            .map(|sample| {
                sample.ensure_aligned()?;
                grid.cell_rects()
                    .enumerate()
                    .map(|(cell, rect)| -> Result<PatchEntry> {
                        let label = sample.label.crop(&rect)?;
                        let conf = sample
                            .confidence
                            .as_ref()
                            .map(|c| c.crop(&rect))
                            .transpose()?;
                        Ok(PatchEntry {
                            sample_id: sample.id.clone(),
                            cell: cell as u32,
                            score: normalized_confidence(&label, conf.as_ref(), difficulty),
                            classes: classes_in(&label, num_classes),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let patches: Vec<PatchEntry> = per_sample.into_iter().flatten().collect();
        Self::from_entries(domain, grid, image_size, num_classes, conf_groups, patches)
    }

    /// Indexes already-scored entries. Entry order breaks score ties.
    pub fn from_entries(
        domain: Domain,
        grid: GridSpec,
        image_size: (u32, u32),
        num_classes: usize,
        conf_groups: usize,
        patches: Vec<PatchEntry>,
    ) -> Result<Self> {
        let cells = grid.cell_count();
        let mut buckets: Vec<Vec<PatchId>> = vec![Vec::new(); cells * num_classes];
        for (id, p) in patches.iter().enumerate() {
            if p.cell as usize >= cells {
                return Err(BdmError::data(format!(
                    "patch {id} refers to cell {} of a {cells}-cell grid",
                    p.cell
                )));
            }
            for &c in &p.classes {
                if c as usize >= num_classes {
                    return Err(BdmError::data(format!("patch {id} lists class {c}")));
                }
                buckets[p.cell as usize * num_classes + c as usize].push(id as PatchId);
            }
        }

        let mut sequences = Vec::with_capacity(cells * num_classes * conf_groups);
        let mut boundaries = Vec::with_capacity(cells * num_classes);
        for mut bucket in buckets {
            bucket.sort_by(|&a, &b| {
                patches[a as usize]
                    .score
                    .total_cmp(&patches[b as usize].score)
            });
            let mut rest = bucket.as_slice();
            let mut starts = Vec::with_capacity(conf_groups);
            for size in split_sizes(rest.len(), conf_groups) {
                let (head, tail) = rest.split_at(size);
                starts.push(head.first().map(|&id| patches[id as usize].score));
                sequences.push(head.to_vec());
                rest = tail;
            }
            boundaries.push(starts.into_iter().skip(1).collect());
        }

        Ok(Self {
            domain,
            grid,
            image_size,
            num_classes,
            conf_groups,
            patches,
            sequences,
            boundaries,
        })
    }

    pub fn sequence_count(&self) -> usize {
        self.sequences.len()
    }

    fn seq_index(&self, key: SeqKey) -> usize {
        (key.cell * self.num_classes + key.class) * self.conf_groups + key.group
    }

    fn check_key(&self, key: SeqKey) -> Result<()> {
        if key.cell >= self.grid.cell_count()
            || key.class >= self.num_classes
            || key.group >= self.conf_groups
        {
            return Err(BdmError::OutOfRange(format!(
                "sequence {key:?} outside bank of {} cells, {} classes, {} groups",
                self.grid.cell_count(),
                self.num_classes,
                self.conf_groups
            )));
        }
        Ok(())
    }

    /// The stored sequence for `(cell, class, group)`, possibly empty.
    pub fn query(&self, cell: usize, class: usize, group: usize) -> Result<&[PatchId]> {
        let key = SeqKey { cell, class, group };
        self.check_key(key)?;
        Ok(&self.sequences[self.seq_index(key)])
    }

    pub fn patch(&self, id: PatchId) -> &PatchEntry {
        &self.patches[id as usize]
    }

    pub fn patches(&self) -> &[PatchEntry] {
        &self.patches
    }

    pub fn group_boundaries(&self, cell: usize, class: usize) -> Result<&[Option<f64>]> {
        self.check_key(SeqKey {
            cell,
            class,
            group: 0,
        })?;
        Ok(&self.boundaries[cell * self.num_classes + class])
    }

    /// All keys with at least one patch, in (cell, class, group) order.
    pub fn non_empty_keys(&self) -> Vec<SeqKey> {
        let mut keys = Vec::new();
        for cell in 0..self.grid.cell_count() {
            for class in 0..self.num_classes {
                for group in 0..self.conf_groups {
                    let key = SeqKey { cell, class, group };
                    if !self.sequences[self.seq_index(key)].is_empty() {
                        keys.push(key);
                    }
                }
            }
        }
        keys
    }

    /// Ids of patches with at least one labeled class.
    pub fn usable_patches(&self) -> Vec<PatchId> {
        (0..self.patches.len() as PatchId)
            .filter(|&id| !self.patches[id as usize].classes.is_empty())
            .collect()
    }

    /// Total sequence memberships across the bank.
    pub fn membership_count(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    /// Confidence group holding `id` within `(cell, class)`, if any.
    pub fn group_of(&self, id: PatchId, class: usize) -> Option<usize> {
        let cell = self.patches.get(id as usize)?.cell as usize;
        (0..self.conf_groups).find(|&g| {
            self.query(cell, class, g)
                .map(|s| s.contains(&id))
                .unwrap_or(false)
        })
    }

    /// Ensures a patch from this bank can fill a cell of `grid`.
    pub fn check_fits(&self, grid: &GridSpec) -> Result<()> {
        if (self.grid.cell_width, self.grid.cell_height) != (grid.cell_width, grid.cell_height)
            || self.grid.cell_count() != grid.cell_count()
        {
            return Err(BdmError::data(format!(
                "{:?} bank has {}x{} grid of {}x{} cells; sample grid is {}x{} of {}x{}",
                self.domain,
                self.grid.cols,
                self.grid.rows,
                self.grid.cell_width,
                self.grid.cell_height,
                grid.cols,
                grid.rows,
                grid.cell_width,
                grid.cell_height
            )));
        }
        Ok(())
    }

    /// Fetches a patch with its pixel data.
    pub fn load_patch(&self, crops: &dyn CropSource, id: PatchId) -> Result<Patch> {
        let entry = self.patch(id);
        let (image_crop, label_crop) = crops.crop(self, id)?;
        let rect = self.grid.cell_rect(entry.cell as usize);
        if image_crop.dims() != (rect.width, rect.height) || label_crop.dims() != image_crop.dims()
        {
            return Err(BdmError::data(format!(
                "crop for patch {id} is {:?}, expected {}x{}",
                image_crop.dims(),
                rect.width,
                rect.height
            )));
        }
        Ok(Patch {
            sample_id: entry.sample_id.clone(),
            cell_index: entry.cell as usize,
            rect,
            image_crop,
            label_crop,
            norm_conf: entry.score,
            classes_present: entry.classes.clone(),
        })
    }
}

/// Supplies pixel data for bank patches.
pub trait CropSource: Send + Sync {
    fn crop(&self, bank: &PatchBank, id: PatchId) -> Result<(Image, LabelMap)>;
}

/// Crops patches straight out of an in-memory dataset.
#[derive(Debug, Clone)]
pub struct DatasetCrops<'a> {
    by_id: HashMap<&'a str, &'a Sample>,
}

impl<'a> DatasetCrops<'a> {
    pub fn new(samples: &'a [Sample]) -> Self {
        Self {
            by_id: samples.iter().map(|s| (s.id.as_str(), s)).collect(),
        }
    }
}

impl CropSource for DatasetCrops<'_> {
    fn crop(&self, bank: &PatchBank, id: PatchId) -> Result<(Image, LabelMap)> {
        let entry = bank.patch(id);
        let sample = self.by_id.get(entry.sample_id.as_str()).ok_or_else(|| {
            BdmError::data(format!(
                "sample {} not found for patch {id}",
                entry.sample_id
            ))
        })?;
        let rect = bank.grid.cell_rect(entry.cell as usize);
        Ok((sample.image.crop(&rect)?, sample.label.crop(&rect)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, w: u32, h: u32, label: Vec<u8>, conf: Option<Vec<f32>>) -> Sample {
        Sample::new(
            id,
            Image::filled(w, h, [10, 20, 30]),
            LabelMap::from_vec(w, h, label).unwrap(),
            conf.map(|c| ConfidenceMap::from_vec(w, h, c).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn divide_exact_grid() {
        let s = sample("a", 8, 6, vec![0; 48], None);
        let g = GridSpec::for_image(8, 6, 4, 3).unwrap();
        let patches = divide(&s, &g).unwrap();
        assert_eq!(patches.len(), 12);
        assert!(patches.iter().all(|p| p.image.dims() == (2, 2)));
        assert_eq!(patches[5].rect, Rect::new(2, 2, 2, 2));
    }

    #[test]
    fn divide_drops_remainder() {
        let mut label = vec![0u8; 63];
        // mark the right column and bottom row
        for y in 0..7 {
            label[y * 9 + 8] = 1;
        }
        for x in 0..9 {
            label[6 * 9 + x] = 1;
        }
        let s = sample("a", 9, 7, label, None);
        let g = GridSpec::for_image(9, 7, 4, 3).unwrap();
        let patches = divide(&s, &g).unwrap();
        assert_eq!(patches.len(), 12);
        assert!(patches
            .iter()
            .all(|p| p.label.data().iter().all(|&v| v == 0)));
    }

    #[test]
    fn divide_rejects_undersized_sample() {
        let s = sample("a", 3, 2, vec![0; 6], None);
        let g = GridSpec::for_image(8, 6, 4, 3).unwrap();
        assert!(divide(&s, &g).is_err());
    }

    #[test]
    fn normalized_confidence_cases() {
        let l = LabelMap::filled(2, 2, 0);
        let c = ConfidenceMap::filled(2, 2, 0.9);
        assert!(normalized_confidence(&l, Some(&c), &[0.9f32 as f64]).abs() < 1e-15);
        let ignore = LabelMap::filled(2, 2, IGNORE);
        assert_eq!(normalized_confidence(&ignore, Some(&c), &[0.5]), -1.0);
    }

    #[test]
    fn normalized_confidence_matches_pixel_loop() {
        let labels = vec![0, 1, IGNORE, 1, 0, 0];
        let confs = vec![0.7f32, 0.4, 0.9, 0.8, 0.95, 0.3];
        let diff = [0.6, 0.5];
        let l = LabelMap::from_vec(3, 2, labels.clone()).unwrap();
        let c = ConfidenceMap::from_vec(3, 2, confs.clone()).unwrap();
        let mut acc = Vec::new();
        for (lab, conf) in labels.iter().zip(&confs) {
            if *lab != IGNORE {
                acc.push(*conf as f64 - diff[*lab as usize]);
            }
        }
        let expect = acc.iter().sum::<f64>() / acc.len() as f64;
        assert!((normalized_confidence(&l, Some(&c), &diff) - expect).abs() < 1e-15);
    }

    #[test]
    fn minimal_bank() {
        let s = sample("a", 2, 2, vec![0, 1, 1, 0], None);
        let g = GridSpec::for_image(2, 2, 1, 1).unwrap();
        let bank = PatchBank::build(Domain::Source, &[s], g, 2, 1, &[1.0, 1.0]).unwrap();
        assert_eq!(bank.sequence_count(), 2);
        assert_eq!(bank.non_empty_keys().len(), 2);
        assert_eq!(bank.query(0, 0, 0).unwrap(), &[0]);
        assert!(bank.query(1, 0, 0).is_err());
        assert!(bank.query(0, 2, 0).is_err());
        assert!(bank.query(0, 0, 1).is_err());
    }

    #[test]
    fn nine_patches_split_three_ways() {
        // one 1x1-cell grid, 9 samples of class 0 with distinct confidences
        let scores = [0.5f32, 0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6];
        let samples: Vec<Sample> = scores
            .iter()
            .enumerate()
            .map(|(i, &c)| sample(&format!("s{i}"), 1, 1, vec![0], Some(vec![c])))
            .collect();
        let g = GridSpec::for_image(1, 1, 1, 1).unwrap();
        let bank = PatchBank::build(Domain::Target, &samples, g, 1, 3, &[0.0]).unwrap();
        let groups: Vec<Vec<f64>> = (0..3)
            .map(|gr| {
                bank.query(0, 0, gr)
                    .unwrap()
                    .iter()
                    .map(|&id| bank.patch(id).score)
                    .collect()
            })
            .collect();
        assert!(groups.iter().all(|g| g.len() == 3));
        let flat: Vec<f64> = groups.concat();
        assert!(flat.windows(2).all(|w| w[0] <= w[1]));
        assert!((groups[2][0] - 0.7f32 as f64).abs() < 1e-12);
        assert_eq!(bank.group_boundaries(0, 0).unwrap().len(), 2);
    }

    #[test]
    fn split_sizes_put_remainder_first() {
        assert_eq!(split_sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(split_sizes(2, 3), vec![1, 1, 0]);
        assert_eq!(split_sizes(0, 3), vec![0, 0, 0]);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let g = GridSpec::for_image(2, 2, 1, 1).unwrap();
        assert!(PatchBank::build(Domain::Source, &[], g, 2, 1, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn unlabeled_patches_join_no_sequence() {
        let s = sample("a", 2, 1, vec![IGNORE, 0], None);
        let g = GridSpec::for_image(2, 1, 2, 1).unwrap();
        let bank = PatchBank::build(Domain::Source, &[s], g, 1, 1, &[1.0]).unwrap();
        assert_eq!(bank.patch(0).score, EMPTY_PATCH_SCORE);
        assert_eq!(bank.membership_count(), 1);
        assert_eq!(bank.usable_patches(), vec![1]);
    }

    #[test]
    fn crops_come_from_the_right_cell() {
        let mut s = sample("a", 4, 2, vec![0, 0, 1, 1, 0, 0, 1, 1], None);
        s.image.put_pixel(3, 1, [1, 2, 3]);
        let g = GridSpec::for_image(4, 2, 2, 1).unwrap();
        let data = vec![s];
        let bank = PatchBank::build(Domain::Source, &data, g, 2, 1, &[1.0, 1.0]).unwrap();
        let crops = DatasetCrops::new(&data);
        let p = bank.load_patch(&crops, 1).unwrap();
        assert_eq!(p.classes_present, vec![1]);
        assert_eq!(p.image_crop.pixel(1, 1), [1, 2, 3]);
    }
}
