//! Seed plumbing and the counter-based generator used everywhere.
//!
//! All randomness flows from 64-bit seeds. Seeds are combined with a
//! SplitMix64-style finaliser ([`mix_in`]), and each derived seed keys an
//! independent ChaCha8 stream. ChaCha is a counter-based cipher, so the byte
//! stream for a given key is fixed across platforms, thread schedules and
//! language ports.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const HASH_ROOT: u64 = 0x7C0F_FEE5_EED5_1A5E;

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Absorbs one word into a running seed hash. Not symmetric in its arguments.
#[inline]
pub fn mix_in(state: u64, word: u64) -> u64 {
    splitmix64(state ^ splitmix64(word))
}

/// Hash of an ordered list of words.
///
/// `seed_hash(&[a, b, c]) == mix_in(seed_hash(&[a, b]), c)`, so
/// [`derive_seed`] applied to a prefix hash extends the same chain.
pub fn seed_hash(words: &[u64]) -> u64 {
    words.iter().fold(HASH_ROOT, |h, &w| mix_in(h, w))
}

/// The `index`-th child of `base`.
#[inline]
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix_in(base, index)
}

/// Deterministic random stream keyed by a 64-bit seed.
#[derive(Clone, Debug)]
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut s = seed;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        Self {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)` by rejection (no modulo bias).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `n` distinct indices from `0..pool`, uniformly without replacement,
    /// in draw order. Partial Fisher-Yates over a sparse swap map.
    pub fn sample_indices(&mut self, pool: usize, n: usize) -> Vec<usize> {
        assert!(n <= pool, "cannot draw {n} from {pool}");
        let mut swapped = std::collections::HashMap::new();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let j = i + self.below((pool - i) as u64) as usize;
            let vj = *swapped.get(&j).unwrap_or(&j);
            let vi = *swapped.get(&i).unwrap_or(&i);
            swapped.insert(j, vi);
            out.push(vj);
        }
        out
    }
}
