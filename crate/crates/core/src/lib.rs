//! Bidirectional domain mixup for semantic segmentation datasets.
//!
//! Low-confidence regions of source and target images are cut out and
//! refilled with patches from the other domain, chosen by class rarity,
//! spatial plausibility and pseudo-label confidence. The crate covers the whole
//! offline pipeline: pseudo labels ([`pseudo_label`]), dataset statistics and
//! spatial priors ([`stats`]), patch banks ([`bank`]), cutout ([`cut`]),
//! selection and pasting ([`mix`]), batch runs with manifests ([`pipeline`],
//! [`manifest`]) and supervision reports ([`report`]).
//!
//! ```no_run
//! use bdm::mix::MixContext;
//! use bdm::persist::{load_bank, load_prior, load_stats};
//! use bdm::seed::rng_from_seed;
//! use bdm::types::MixConfig;
//! # fn main() -> bdm::error::Result<()> {
//! let config = MixConfig::default();
//! let source = load_bank("banks/source".as_ref())?;
//! let target = load_bank("banks/target".as_ref())?;
//! let balance = load_stats("source-stats.json".as_ref())?.class_balance(config.alpha)?;
//! let prior = load_prior("prior.json".as_ref())?;
//! let ctx = MixContext::new(source.view(), target.view(), &balance, &prior, &config)?;
//! # let (src, tgt): (bdm::types::Sample, bdm::types::Sample) = unimplemented!();
//! let (mixed_src, mixed_tgt) = ctx.mix_pair(&src, &tgt, &mut rng_from_seed(7))?;
//! # Ok(()) }
//! ```

pub mod bank;
pub mod commands;
pub mod config;
pub mod cut;
pub mod error;
pub mod interop;
pub mod io;
pub mod manifest;
pub mod mix;
pub mod persist;
pub mod pipeline;
pub mod pseudo_label;
pub mod report;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod types;

pub use error::{BdmError, Result};
