//! Buffer-level entry points for in-process bindings.
//!
//! Arrays cross the boundary as contiguous row-major buffers: images are
//! `height x width x 3` u8, labels `height x width` u8 and confidences
//! `height x width` f32. Nothing here re-implements mixing; [`mix_pair`] calls
//! the engine with an rng seeded exactly as the CLI seeds pair rngs, so passing
//! a manifest's `pair_seed` reproduces that pair.

use std::path::Path;
use std::sync::Arc;

use crate::cut::CutPlan;
use crate::error::{BdmError, Result};
use crate::mix::{MixContext, MixedSample, PasteRecord};
use crate::persist::{load_bank as load_bank_dir, load_prior, load_stats, LoadedBank};
use crate::seed::rng_from_seed;
use crate::stats::SpatialPrior;
use crate::types::{ConfidenceMap, Image, LabelMap, MixConfig, Sample};

/// Numeric code for an error, matching the CLI exit codes.
pub fn error_code(err: &BdmError) -> i32 {
    err.exit_code()
}

/// Builds a sample from raw buffers, checking every length against the
/// declared shape.
pub fn sample_from_buffers(
    id: &str,
    height: u32,
    width: u32,
    image: &[u8],
    label: &[u8],
    confidence: Option<&[f32]>,
) -> Result<Sample> {
    let n = height as usize * width as usize;
    let check = |name: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(BdmError::data(format!(
                "{name} buffer has {got} elements, shape {height}x{width} needs {want}"
            )))
        }
    };
    check("image", image.len(), n * 3)?;
    check("label", label.len(), n)?;
    if let Some(c) = confidence {
        check("confidence", c.len(), n)?;
    }
    Sample::new(
        id,
        Image::from_vec(width, height, image.to_vec())?,
        LabelMap::from_vec(width, height, label.to_vec())?,
        confidence
            .map(|c| ConfidenceMap::from_vec(width, height, c.to_vec()))
            .transpose()?,
    )
}

/// Read-only bank handle; cheap to clone and safe to share across threads.
#[derive(Debug, Clone)]
pub struct BankHandle(Arc<LoadedBank>);

impl BankHandle {
    pub fn bank(&self) -> &LoadedBank {
        &self.0
    }
}

pub fn load_bank(path: &Path) -> Result<BankHandle> {
    Ok(BankHandle(Arc::new(load_bank_dir(path)?)))
}

/// Source-domain class balance and spatial prior shared by all pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MixResources {
    pub class_balance: Vec<f64>,
    pub prior: SpatialPrior,
}

impl MixResources {
    pub fn load(stats: &Path, prior: &Path, alpha: f64) -> Result<Self> {
        Ok(Self {
            class_balance: load_stats(stats)?.class_balance(alpha)?,
            prior: load_prior(prior)?,
        })
    }
}

/// One mixed output as buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBuffers {
    pub sample_id: String,
    pub height: u32,
    pub width: u32,
    pub image: Vec<u8>,
    pub label: Vec<u8>,
    pub cut_plan: CutPlan,
    pub provenance: Vec<PasteRecord>,
}

impl From<MixedSample> for MixedBuffers {
    fn from(m: MixedSample) -> Self {
        Self {
            sample_id: m.sample_id,
            height: m.image.height(),
            width: m.image.width(),
            image: m.image.into_data(),
            label: m.label.into_data(),
            cut_plan: m.cut_plan,
            provenance: m.provenance,
        }
    }
}

/// Mixes one pair on an rng seeded with `seed`.
pub fn mix_pair(
    source_bank: &BankHandle,
    target_bank: &BankHandle,
    resources: &MixResources,
    src: &Sample,
    tgt: &Sample,
    config: &MixConfig,
    seed: u64,
) -> Result<(MixedBuffers, MixedBuffers)> {
    let ctx = MixContext::new(
        source_bank.0.view(),
        target_bank.0.view(),
        &resources.class_balance,
        &resources.prior,
        config,
    )?;
    let (s, t) = ctx.mix_pair(src, tgt, &mut rng_from_seed(seed))?;
    Ok((s.into(), t.into()))
}
