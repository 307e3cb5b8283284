//! Seeded random streams.
//!
//! Every random decision draws from a [`Pcg64`] stream whose seed is derived
//! from a path of integers (run seed, AOI, purpose, configuration, iteration,
//! fold, tree). Two computations with the same path see the same stream no
//! matter which thread runs them or in what order, so serial and parallel
//! evaluation agree bit for bit.

use rand::RngExt;
use rand_pcg::Pcg64;

pub use rand_pcg::Pcg64 as StreamRng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a, used to fold identifiers such as AOI ids into a path.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// A position in the tree of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedPath(u64);

impl SeedPath {
    pub fn new(seed: u64) -> Self {
        SeedPath(splitmix64(seed))
    }

    pub fn child(self, key: u64) -> Self {
        SeedPath(splitmix64(self.0 ^ splitmix64(key.wrapping_mul(GOLDEN) ^ 0x5851_F42D_4C95_7F2D)))
    }

    pub fn child_str(self, key: &str) -> Self {
        self.child(hash_str(key))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> Pcg64 {
        let a = splitmix64(self.0);
        let b = splitmix64(a);
        let c = splitmix64(b);
        Pcg64::new((u128::from(a) << 64) | u128::from(b), u128::from(c))
    }
}

/// Uniform integer in `0..n` (n > 0), drawn through `u64` so the result does
/// not depend on the platform's pointer width.
pub fn below(rng: &mut Pcg64, n: usize) -> usize {
    debug_assert!(n > 0);
    rng.random_range(0..n as u64) as usize
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut Pcg64, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

/// `k` distinct indices from `0..n`, in draw order (partial Fisher-Yates).
pub fn sample_without_replacement(rng: &mut Pcg64, n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + below(rng, n - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
