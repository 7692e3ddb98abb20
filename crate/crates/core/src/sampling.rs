//! Deterministic sampling helpers.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for the `k`-th independent stream derived from a master seed.
pub fn derive_seed(master: u64, k: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `lo * 2^k` for every `k >= 0` with `lo * 2^k <= hi`.
pub fn dyadic(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(lo > 0.0) {
        return out;
    }
    let mut x = lo;
    while x <= hi {
        out.push(x);
        x *= 2.0;
    }
    out
}

/// Up to `n` distinct items chosen uniformly, returned in their original order.
pub fn choose<T: Copy>(items: &[T], n: usize, seed: u64) -> Vec<T> {
    if n >= items.len() {
        return items.to_vec();
    }
    let mut picked = index::sample(&mut rng(seed), items.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i]).collect()
}
