//! Seed derivation. Every worker owns an rng derived from the global seed and
//! the identity of what it processes, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator used throughout the engine.
pub type MixRng = ChaCha8Rng;

/// Hashes a global seed together with labelled parts into a 64-bit seed.
pub fn derive_seed(global: u64, parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// Seed for mixing pair `index` made of source `src_id` and target `tgt_id`.
pub fn pair_seed(global: u64, index: u64, src_id: &str, tgt_id: &str) -> u64 {
    derive_seed(
        global,
        &[
            b"pair",
            &index.to_le_bytes(),
            src_id.as_bytes(),
            tgt_id.as_bytes(),
        ],
    )
}

pub fn rng_from_seed(seed: u64) -> MixRng {
    MixRng::seed_from_u64(seed)
}
