//! Splittable, order-independent random streams.
//!
//! Every replicated computation in this crate draws from a stream derived
//! injectively from (master seed, index path). Derivation is a pure function
//! of the path, so replicates can run in any order, on any number of threads,
//! and still see identical randomness — the basis of the crate's
//! byte-identical-reports guarantee.
//!
//! Derivation uses the SplitMix64 finalizer (a bijection on `u64`): for a
//! fixed parent key, distinct child indices map to distinct child keys.
//! Streams that actually generate bulk randomness are expanded into a
//! [`ChaCha8Rng`] keyed by the derived word; a single fair coin can be taken
//! directly from the mixed key without paying for cipher setup.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer: a bijective mixer with full avalanche.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Golden-ratio increment used by SplitMix64 to decorrelate nearby inputs.
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Odd multiplier making `index -> index * M + GOLDEN` a bijection.
const CHILD_STEP: u64 = 0xD1B5_4A32_D192_ED03;

/// A derived position in the stream tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamSeed {
    key: u64,
}

impl StreamSeed {
    /// Root of the tree for a user-supplied master seed.
    pub fn root(seed: u64) -> Self {
        StreamSeed {
            key: mix(seed.wrapping_add(GOLDEN)),
        }
    }

    /// The `index`-th child stream. For a fixed parent this is injective in
    /// `index`: the map `i -> mix(key ^ mix(i * STEP + GOLDEN))` composes
    /// bijections with an xor by a constant.
    pub fn child(self, index: u64) -> Self {
        StreamSeed {
            key: mix(self.key ^ mix(index.wrapping_mul(CHILD_STEP).wrapping_add(GOLDEN))),
        }
    }

    /// Expands the stream into a full generator.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }

    /// One fair coin, without cipher setup. Uses a decorrelated re-mix of the
    /// key so the bit is independent of the key bits consumed by `child`.
    pub fn coin(self) -> bool {
        mix(self.key ^ 0x2545_F491_4F6C_DD1D) & 1 == 1
    }

    /// The raw derived key (used only by diagnostics and tests).
    pub fn key(self) -> u64 {
        self.key
    }
}
