//! Patch selection, paste and the bidirectional mix.
//!
//! For every cut cell a patch is drawn from the other domain's bank. The
//! sequence `(class c, cell j, group g)` is chosen with probability
//! proportional to `P_CB(c) * P_SC(j) * P_PC(g)`, restricted to non-empty
//! sequences, and a patch is then drawn uniformly from that sequence.
//!
//! * `P_CB` favours rare classes (see [`crate::stats::class_balance_probs`]).
//! * `P_SC` ranks bank cell locations by the spatial prior of the class that
//!   dominates the cut cell's center.
//! * `P_PC` weights the confidence groups, lowest group first.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bank::{CropSource, Domain, Patch, PatchBank, PatchId, SeqKey};
use crate::cut::{confidence_cutout, CutPlan};
use crate::error::{BdmError, Result};
use crate::stats::SpatialPrior;
use crate::types::{
    GridSpec, Image, LabelMap, MixConfig, Sample, SelectionMode, SpatialQuery, IGNORE,
};

const SUM_TOLERANCE: f64 = 1e-9;

/// The three factor distributions for one cut cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionWeights {
    pub class_balance: Vec<f64>,
    pub spatial: Vec<f64>,
    pub confidence: Vec<f64>,
}

impl SelectionWeights {
    /// Checks that each factor is a probability vector.
    pub fn new(class_balance: Vec<f64>, spatial: Vec<f64>, confidence: Vec<f64>) -> Result<Self> {
        for (name, v) in [
            ("class-balance", &class_balance),
            ("spatial", &spatial),
            ("confidence", &confidence),
        ] {
            if v.is_empty() || v.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(BdmError::data(format!(
                    "{name} weights must be non-empty, finite and non-negative"
                )));
            }
            let sum: f64 = v.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(BdmError::data(format!(
                    "{name} weights sum to {sum}, not 1"
                )));
            }
        }
        Ok(Self {
            class_balance,
            spatial,
            confidence,
        })
    }

    /// Same factors without the sum-to-one check. Selection normalizes the
    /// product anyway, so any positive scaling gives the same draw.
    pub fn unnormalized(class_balance: Vec<f64>, spatial: Vec<f64>, confidence: Vec<f64>) -> Self {
        Self {
            class_balance,
            spatial,
            confidence,
        }
    }

    fn check_shape(&self, bank: &PatchBank) -> Result<()> {
        if self.class_balance.len() != bank.num_classes
            || self.spatial.len() != bank.grid.cell_count()
            || self.confidence.len() != bank.conf_groups
        {
            return Err(BdmError::data(format!(
                "weights shaped ({}, {}, {}) for a bank of {} classes, {} cells, {} groups",
                self.class_balance.len(),
                self.spatial.len(),
                self.confidence.len(),
                bank.num_classes,
                bank.grid.cell_count(),
                bank.conf_groups
            )));
        }
        Ok(())
    }

    fn product(&self, key: &SeqKey) -> f64 {
        self.class_balance[key.class] * self.spatial[key.cell] * self.confidence[key.group]
    }
}

pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Normalizes `class`'s prior over the cell centers; uniform when the map
/// is zero at every center.
pub fn spatial_probs_for_class(
    prior: &SpatialPrior,
    class: usize,
    cell_centers: &[(f64, f64)],
) -> Vec<f64> {
    let raw: Vec<f64> = cell_centers
        .iter()
        .map(|&(x, y)| prior.value(class, x, y).max(0.0))
        .collect();
    let sum: f64 = raw.iter().sum();
    if sum > 0.0 {
        raw.into_iter().map(|v| v / sum).collect()
    } else {
        uniform(cell_centers.len())
    }
}

/// Spatial-continuity distribution over bank cell locations for a cut
/// centered at `cut_center` (normalized coordinates).
pub fn spatial_continuity_probs(
    prior: &SpatialPrior,
    cut_center: (f64, f64),
    cell_centers: &[(f64, f64)],
) -> Vec<f64> {
    let class = prior.argmax_at(cut_center.0, cut_center.1);
    spatial_probs_for_class(prior, class, cell_centers)
}

/// Exact selection probability of every non-empty sequence.
pub fn selection_distribution(
    bank: &PatchBank,
    weights: &SelectionWeights,
) -> Result<Vec<(SeqKey, f64)>> {
    weights.check_shape(bank)?;
    let keyed: Vec<(SeqKey, f64)> = bank
        .non_empty_keys()
        .into_iter()
        .map(|k| {
            let w = weights.product(&k);
            (k, w)
        })
        .collect();
    let total: f64 = keyed.iter().map(|(_, w)| w).sum();
    if keyed.is_empty() || !total.is_finite() || total <= 0.0 {
        return Err(BdmError::BankUnusable(format!(
            "{:?} bank has no sequence with positive selection weight",
            bank.domain
        )));
    }
    Ok(keyed.into_iter().map(|(k, w)| (k, w / total)).collect())
}

/// Outcome of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub patch: PatchId,
    /// The sequence drawn from; `None` for uniform-patch selection.
    pub key: Option<SeqKey>,
}

/// Draws a sequence by the joint weights, then a patch uniformly within it.
pub fn select<R: Rng + ?Sized>(
    bank: &PatchBank,
    weights: &SelectionWeights,
    rng: &mut R,
) -> Result<Selection> {
    let dist = selection_distribution(bank, weights)?;
    let index = WeightedIndex::new(dist.iter().map(|(_, p)| *p))
        .map_err(|e| BdmError::BankUnusable(e.to_string()))?;
    let key = dist[index.sample(rng)].0;
    let seq = bank.query(key.cell, key.class, key.group)?;
    let patch = seq[rng.random_range(0..seq.len())];
    Ok(Selection {
        patch,
        key: Some(key),
    })
}

/// Draws uniformly among every patch with at least one labeled class.
pub fn select_uniform<R: Rng + ?Sized>(bank: &PatchBank, rng: &mut R) -> Result<Selection> {
    let usable = bank.usable_patches();
    if usable.is_empty() {
        return Err(BdmError::BankUnusable(format!(
            "{:?} bank holds no labeled patch",
            bank.domain
        )));
    }
    Ok(Selection {
        patch: usable[rng.random_range(0..usable.len())],
        key: None,
    })
}

/// [`select`] followed by fetching the patch's pixels.
pub fn select_patch<R: Rng + ?Sized>(
    bank: &PatchBank,
    crops: &dyn CropSource,
    weights: &SelectionWeights,
    rng: &mut R,
) -> Result<(Selection, Patch)> {
    let sel = select(bank, weights, rng)?;
    Ok((sel, bank.load_patch(crops, sel.patch)?))
}

/// Where a pasted cell came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PasteRecord {
    pub cut_cell: usize,
    pub bank_domain: Domain,
    pub patch_sample_id: String,
    /// Cell location of the patch in its own image.
    pub source_cell: usize,
    /// Class the sequence was drawn for (`None` under uniform selection).
    pub class: Option<u8>,
    pub conf_group: Option<u8>,
    pub norm_conf: f64,
    /// Per-class pixel counts of the pasted label crop.
    pub pasted_pixels: Vec<u64>,
}

/// A sample whose cut cells were refilled from the other domain.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSample {
    pub sample_id: String,
    pub domain: Domain,
    pub image: Image,
    pub label: LabelMap,
    pub cut_plan: CutPlan,
    pub provenance: Vec<PasteRecord>,
}

/// A patch chosen for one cut cell.
#[derive(Debug, Clone)]
pub struct PasteChoice {
    pub patch: Patch,
    pub selection: Selection,
    pub bank_domain: Domain,
}

fn class_histogram(label: &LabelMap, num_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; num_classes];
    for &v in label.data() {
        if v != IGNORE && (v as usize) < num_classes {
            counts[v as usize] += 1;
        }
    }
    counts
}

/// Copies each chosen patch into its cut cell. `choices` pairs with
/// `plan.cut_cells` in order.
pub fn paste(
    masked: &Sample,
    domain: Domain,
    grid: &GridSpec,
    plan: &CutPlan,
    choices: Vec<PasteChoice>,
    num_classes: usize,
) -> Result<MixedSample> {
    if choices.len() != plan.cut_cells.len() {
        return Err(BdmError::Invariant(format!(
            "{} patches for {} cut cells",
            choices.len(),
            plan.cut_cells.len()
        )));
    }
    let mut image = masked.image.clone();
    let mut label = masked.label.clone();
    let mut provenance = Vec::with_capacity(choices.len());
    for (&cell, choice) in plan.cut_cells.iter().zip(choices) {
        let rect = grid.cell_rect(cell);
        let p = &choice.patch;
        if p.image_crop.dims() != (rect.width, rect.height)
            || p.label_crop.dims() != (rect.width, rect.height)
        {
            return Err(BdmError::data(format!(
                "patch {}#{} is {:?} but cut cell {cell} is {}x{}",
                p.sample_id,
                p.cell_index,
                p.image_crop.dims(),
                rect.width,
                rect.height
            )));
        }
        image.paste(&rect, &p.image_crop)?;
        label.paste(&rect, &p.label_crop)?;
        provenance.push(PasteRecord {
            cut_cell: cell,
            bank_domain: choice.bank_domain,
            patch_sample_id: p.sample_id.clone(),
            source_cell: p.cell_index,
            class: choice.selection.key.map(|k| k.class as u8),
            conf_group: choice.selection.key.map(|k| k.group as u8),
            norm_conf: p.norm_conf,
            pasted_pixels: class_histogram(&p.label_crop, num_classes),
        });
    }
    Ok(MixedSample {
        sample_id: masked.id.clone(),
        domain,
        image,
        label,
        cut_plan: plan.clone(),
        provenance,
    })
}

/// A bank together with the source of its pixel data.
#[derive(Clone, Copy)]
pub struct BankView<'a> {
    pub bank: &'a PatchBank,
    pub crops: &'a dyn CropSource,
}

impl<'a> BankView<'a> {
    pub fn new(bank: &'a PatchBank, crops: &'a dyn CropSource) -> Self {
        Self { bank, crops }
    }
}

/// Everything a mixing worker needs; immutable and shareable.
#[derive(Clone, Copy)]
pub struct MixContext<'a> {
    pub source: BankView<'a>,
    pub target: BankView<'a>,
    /// Class-balance probabilities from the source domain.
    pub class_balance: &'a [f64],
    pub prior: &'a SpatialPrior,
    pub config: &'a MixConfig,
}

impl<'a> MixContext<'a> {
    pub fn new(
        source: BankView<'a>,
        target: BankView<'a>,
        class_balance: &'a [f64],
        prior: &'a SpatialPrior,
        config: &'a MixConfig,
    ) -> Result<Self> {
        config.validate()?;
        let k = config.num_classes;
        for (view, domain) in [(source, Domain::Source), (target, Domain::Target)] {
            let b = view.bank;
            if b.domain != domain {
                return Err(BdmError::config(format!(
                    "expected a {domain:?} bank, got {:?}",
                    b.domain
                )));
            }
            if b.num_classes != k || b.conf_groups != config.conf_groups {
                return Err(BdmError::config(format!(
                    "{domain:?} bank has K={} R={}, config has K={k} R={}",
                    b.num_classes, b.conf_groups, config.conf_groups
                )));
            }
            if (b.grid.cols, b.grid.rows) != (config.grid_cols, config.grid_rows) {
                return Err(BdmError::config(format!(
                    "{domain:?} bank grid {}x{} differs from config {}x{}",
                    b.grid.cols, b.grid.rows, config.grid_cols, config.grid_rows
                )));
            }
        }
        if class_balance.len() != k {
            return Err(BdmError::config(format!(
                "class balance has {} entries for {k} classes",
                class_balance.len()
            )));
        }
        if prior.num_classes != k {
            return Err(BdmError::config(format!(
                "spatial prior has {} classes, config has {k}",
                prior.num_classes
            )));
        }
        Ok(Self {
            source,
            target,
            class_balance,
            prior,
            config,
        })
    }

    fn bank_for(&self, domain: Domain) -> BankView<'a> {
        match domain {
            Domain::Source => self.source,
            Domain::Target => self.target,
        }
    }

    /// Factor weights for filling `cut_cell` of `original`.
    pub fn weights_for(
        &self,
        original: &Sample,
        grid: &GridSpec,
        cut_cell: usize,
    ) -> Result<SelectionWeights> {
        let cfg = self.config;
        let k = cfg.num_classes;
        let class_balance = if cfg.use_class_balance {
            self.class_balance.to_vec()
        } else {
            uniform(k)
        };
        let spatial = if cfg.use_spatial {
            let centers = grid.cell_centers();
            let center = grid.cell_center(cut_cell);
            let class = match cfg.spatial_query {
                SpatialQuery::PriorArgmax => None,
                SpatialQuery::RegionDominantClass => {
                    dominant_class(&original.label, &grid.cell_rect(cut_cell), k)
                }
            }
            .unwrap_or_else(|| self.prior.argmax_at(center.0, center.1));
            spatial_probs_for_class(self.prior, class, &centers)
        } else {
            uniform(grid.cell_count())
        };
        let confidence = if cfg.use_confidence {
            cfg.group_probs.clone()
        } else {
            uniform(cfg.conf_groups)
        };
        Ok(SelectionWeights::unnormalized(
            class_balance,
            spatial,
            confidence,
        ))
    }

    /// Cuts `sample` (of `domain`) and refills it from the other domain's bank.
    pub fn mix_one<R: Rng + ?Sized>(
        &self,
        sample: &Sample,
        domain: Domain,
        rng: &mut R,
    ) -> Result<MixedSample> {
        let cfg = self.config;
        let grid = cfg.grid_for(sample.width(), sample.height())?;
        let other = self.bank_for(domain.other());
        other.bank.check_fits(&grid)?;
        let (masked, plan) = confidence_cutout(sample, &grid, cfg.gamma, cfg.num_cut_boxes, rng)?;
        let mut choices = Vec::with_capacity(plan.cut_cells.len());
        for &cell in &plan.cut_cells {
            let selection = match cfg.selection {
                SelectionMode::Joint => {
                    let weights = self.weights_for(sample, &grid, cell)?;
                    select(other.bank, &weights, rng)?
                }
                SelectionMode::UniformPatch => select_uniform(other.bank, rng)?,
            };
            choices.push(PasteChoice {
                patch: other.bank.load_patch(other.crops, selection.patch)?,
                selection,
                bank_domain: other.bank.domain,
            });
        }
        paste(&masked, domain, &grid, &plan, choices, cfg.num_classes)
    }

    /// Both mixing directions for one pair: source holes filled from the
    /// target bank, then target holes filled from the source bank.
    pub fn mix_pair<R: Rng + ?Sized>(
        &self,
        src: &Sample,
        tgt: &Sample,
        rng: &mut R,
    ) -> Result<(MixedSample, MixedSample)> {
        let mixed_s = self.mix_one(src, Domain::Source, rng)?;
        let mixed_t = self.mix_one(tgt, Domain::Target, rng)?;
        Ok((mixed_s, mixed_t))
    }
}

/// Most frequent labeled class in `rect`; ties go to the lowest id.
fn dominant_class(
    label: &LabelMap,
    rect: &crate::types::Rect,
    num_classes: usize,
) -> Option<usize> {
    let mut counts = vec![0u64; num_classes];
    for v in label.iter_rect(rect) {
        if v != IGNORE && (v as usize) < num_classes {
            counts[v as usize] += 1;
        }
    }
    let (best, &n) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    (n > 0).then_some(best)
}

/// One bidirectional mix of a source/target pair.
#[allow(clippy::too_many_arguments)]
pub fn bdm_mix_pair<R: Rng + ?Sized>(
    src: &Sample,
    tgt: &Sample,
    src_bank: BankView<'_>,
    tgt_bank: BankView<'_>,
    class_balance: &[f64],
    prior: &SpatialPrior,
    config: &MixConfig,
    rng: &mut R,
) -> Result<(MixedSample, MixedSample)> {
    MixContext::new(src_bank, tgt_bank, class_balance, prior, config)?.mix_pair(src, tgt, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::{DatasetCrops, PatchEntry};
    use crate::seed::rng_from_seed;

    fn flat_prior(k: usize, dominant: usize) -> SpatialPrior {
        let res = 4;
        let mut values = vec![0.1; k * res * res];
        for v in &mut values[dominant * res * res..(dominant + 1) * res * res] {
            *v = 0.9;
        }
        SpatialPrior {
            num_classes: k,
            resolution: res,
            bandwidth: 0.1,
            values,
            empty: vec![false; k],
        }
    }

    #[test]
    fn flat_dominant_prior_gives_uniform_spatial_probs() {
        let prior = flat_prior(8, 5);
        let grid = GridSpec::for_image(8, 6, 4, 3).unwrap();
        let p = spatial_continuity_probs(&prior, grid.cell_center(0), &grid.cell_centers());
        assert_eq!(p.len(), 12);
        for v in p {
            assert!((v - 1.0 / 12.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_prior_falls_back_to_uniform() {
        let mut prior = flat_prior(2, 0);
        prior.values.iter_mut().for_each(|v| *v = 0.0);
        let p = spatial_continuity_probs(&prior, (0.5, 0.5), &[(0.1, 0.1), (0.9, 0.9)]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    fn toy_bank(entries: Vec<PatchEntry>, k: usize, r: usize) -> PatchBank {
        let grid = GridSpec::for_image(2, 1, 2, 1).unwrap();
        PatchBank::from_entries(Domain::Target, grid, (2, 1), k, r, entries).unwrap()
    }

    fn entry(id: &str, cell: u32, score: f64, classes: &[u8]) -> PatchEntry {
        PatchEntry {
            sample_id: id.into(),
            cell,
            score,
            classes: classes.to_vec(),
        }
    }

    #[test]
    fn single_sequence_is_always_selected() {
        let bank = toy_bank(vec![entry("a", 1, 0.0, &[1])], 2, 1);
        let w = SelectionWeights::new(vec![0.9, 0.1], vec![0.8, 0.2], vec![1.0]).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let s = select(&bank, &w, &mut rng).unwrap();
            assert_eq!(s.patch, 0);
            assert_eq!(
                s.key,
                Some(SeqKey {
                    cell: 1,
                    class: 1,
                    group: 0
                })
            );
        }
    }

    #[test]
    fn zero_weight_class_is_never_drawn() {
        let bank = toy_bank(
            vec![entry("a", 0, 0.0, &[0, 1]), entry("b", 1, 0.0, &[1])],
            2,
            1,
        );
        let w = SelectionWeights::new(vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0]).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..1000 {
            assert_eq!(select(&bank, &w, &mut rng).unwrap().key.unwrap().class, 1);
        }
    }

    #[test]
    fn empty_or_zero_weight_bank_is_unusable() {
        let bank = toy_bank(vec![entry("a", 0, -1.0, &[])], 2, 1);
        let w = SelectionWeights::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0]).unwrap();
        let err = select(&bank, &w, &mut rng_from_seed(0)).unwrap_err();
        assert!(matches!(err, BdmError::BankUnusable(_)));
        assert!(select_uniform(&bank, &mut rng_from_seed(0)).is_err());

        let bank = toy_bank(vec![entry("a", 0, 0.0, &[0])], 2, 1);
        let w = SelectionWeights::new(vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0]).unwrap();
        assert!(select(&bank, &w, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn distribution_matches_normalized_product() {
        let bank = toy_bank(
            vec![
                entry("a", 0, 0.1, &[0]),
                entry("b", 0, 0.2, &[0, 1]),
                entry("c", 1, 0.3, &[1]),
            ],
            2,
            2,
        );
        let w = SelectionWeights::new(vec![0.25, 0.75], vec![0.4, 0.6], vec![0.3, 0.7]).unwrap();
        let dist = selection_distribution(&bank, &w).unwrap();
        // non-empty: (0,0,0) a, (0,0,1) b, (0,1,0) b, (1,1,0) c
        let raw = [
            0.25 * 0.4 * 0.3,
            0.25 * 0.4 * 0.7,
            0.75 * 0.4 * 0.3,
            0.75 * 0.6 * 0.3,
        ];
        let total: f64 = raw.iter().sum();
        assert_eq!(dist.len(), 4);
        for ((_, p), r) in dist.iter().zip(raw) {
            assert!((p - r / total).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_reject_bad_vectors() {
        assert!(SelectionWeights::new(vec![0.5, 0.6], vec![1.0], vec![1.0]).is_err());
        assert!(SelectionWeights::new(vec![1.0], vec![], vec![1.0]).is_err());
        assert!(SelectionWeights::new(vec![1.5, -0.5], vec![1.0], vec![1.0]).is_err());
    }

    fn two_cell_sample(id: &str, label: [u8; 2], rgb: [u8; 3]) -> Sample {
        Sample::new(
            id,
            Image::filled(2, 1, rgb),
            LabelMap::from_vec(2, 1, label.to_vec()).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn paste_identity_and_single_cell() {
        let base = two_cell_sample("base", [IGNORE, 0], [5, 5, 5]);
        let grid = GridSpec::for_image(2, 1, 2, 1).unwrap();
        let none = paste(&base, Domain::Source, &grid, &CutPlan::empty(), vec![], 2).unwrap();
        assert_eq!(none.image, base.image);
        assert_eq!(none.label, base.label);

        let donor = two_cell_sample("donor", [1, 1], [200, 100, 50]);
        let data = vec![donor];
        let bank = toy_bank(vec![entry("donor", 1, 0.0, &[1])], 2, 1);
        let patch = bank.load_patch(&DatasetCrops::new(&data), 0).unwrap();
        let plan = CutPlan {
            candidates: vec![0],
            ratios: vec![1.0],
            cut_cells: vec![0],
        };
        let mixed = paste(
            &base,
            Domain::Source,
            &grid,
            &plan,
            vec![PasteChoice {
                patch,
                selection: Selection {
                    patch: 0,
                    key: None,
                },
                bank_domain: Domain::Target,
            }],
            2,
        )
        .unwrap();
        assert_eq!(mixed.image.pixel(0, 0), [200, 100, 50]);
        assert_eq!(mixed.label.get(0, 0), 1);
        assert_eq!(mixed.image.pixel(1, 0), [5, 5, 5]);
        assert_eq!(mixed.label.get(1, 0), 0);
        assert_eq!(mixed.provenance[0].pasted_pixels, vec![0, 1]);
        assert_eq!(mixed.provenance[0].source_cell, 1);
    }

    #[test]
    fn paste_rejects_wrong_size() {
        let base = two_cell_sample("base", [IGNORE, 0], [5, 5, 5]);
        let grid = GridSpec::for_image(2, 1, 2, 1).unwrap();
        let plan = CutPlan {
            candidates: vec![0],
            ratios: vec![1.0],
            cut_cells: vec![0],
        };
        let patch = Patch {
            sample_id: "x".into(),
            cell_index: 0,
            rect: crate::types::Rect::new(0, 0, 2, 1),
            image_crop: Image::filled(2, 1, [0, 0, 0]),
            label_crop: LabelMap::filled(2, 1, 0),
            norm_conf: 0.0,
            classes_present: vec![0],
        };
        let choice = PasteChoice {
            patch,
            selection: Selection {
                patch: 0,
                key: None,
            },
            bank_domain: Domain::Target,
        };
        assert!(paste(&base, Domain::Source, &grid, &plan, vec![choice], 2).is_err());
    }

    #[test]
    fn dominant_class_ties_and_empty() {
        let l = LabelMap::from_vec(4, 1, vec![2, 1, 1, 2]).unwrap();
        let r = crate::types::Rect::new(0, 0, 4, 1);
        assert_eq!(dominant_class(&l, &r, 3), Some(1));
        let l = LabelMap::filled(2, 1, IGNORE);
        assert_eq!(
            dominant_class(&l, &crate::types::Rect::new(0, 0, 2, 1), 3),
            None
        );
    }
}
