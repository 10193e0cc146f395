//! Seeded random streams.
//!
//! Every stream is xoshiro256++ whose 256-bit state is filled from a 64-bit
//! seed with SplitMix64 (the reference seeding procedure). Child seeds are
//! derived with [`derive_seed`], so instance `k` of a generated set never
//! depends on how many other instances were drawn before it.
//!
//! Conversions:
//! - `uniform_f64`: `(next_u64 >> 11) * 2^-53`, a value in `[0, 1)`.
//! - `index(len)`: rejection sampling on `next_u64`, accepting draws below
//!   the largest multiple of `len` and returning `draw % len`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use serde::{Deserialize, Serialize};

/// Name recorded in dataset manifests and checkpoints.
pub const RNG_ALGORITHM: &str = "xoshiro256++ (SplitMix64 seeding)";

/// Mixes `parent` and `stream` into an independent child seed.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    let mut a = SplitMix64::seed_from_u64(parent);
    let mixed = a.next_u64() ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    SplitMix64::seed_from_u64(mixed).next_u64()
}

/// Seed for a path of stream indices, e.g. `(epoch, batch, instance)`.
pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &p| derive_seed(s, p))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rng {
    inner: Xoshiro256PlusPlus,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    pub fn uniform_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..len`. Panics when `len == 0`.
    pub fn index(&mut self, len: usize) -> usize {
        assert!(len > 0, "cannot sample from an empty range");
        let len = len as u64;
        let zone = u64::MAX - (u64::MAX % len + 1) % len;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return (x % len) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle drawing from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}
