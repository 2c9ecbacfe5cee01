//! Seed derivation.
//!
//! A single master seed fans out to one seed per pipeline stage (or per
//! trial). The derived seed is `splitmix64(master ^ fnv1a64(tag))`, so a
//! stage can be rerun on its own and still see the same random stream it
//! would have seen inside a full run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(tag: &str) -> u64 {
    tag.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stage named `tag` under `master`.
pub fn stage_seed(master: u64, tag: &str) -> u64 {
    splitmix64(master ^ fnv1a64(tag))
}

/// The generator every seeded component uses.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_separate_streams() {
        assert_eq!(stage_seed(7, "label"), stage_seed(7, "label"));
        assert_ne!(stage_seed(7, "label"), stage_seed(7, "train"));
        assert_ne!(stage_seed(7, "label"), stage_seed(8, "label"));
    }
}
