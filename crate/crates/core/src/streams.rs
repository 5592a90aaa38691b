//! Deterministic derivation of independent random streams.
//!
//! Every unit of Monte Carlo work is addressed by a path of integers (for
//! example `[point, pair, repeat, run]`). The path is folded into the master
//! seed with a SplitMix64 finalizer and used to seed a ChaCha8 generator, so
//! the stream a task sees depends only on its address and never on which
//! worker thread executes it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every simulated stream.
pub type StreamRng = ChaCha8Rng;

// Domain tags keep streams used for different purposes apart even when
// their numeric paths coincide.
pub(crate) const TAG_PAIR: u64 = 0x5041_4952;
pub(crate) const TAG_ESTIMATE: u64 = 0x4553_544d;
pub(crate) const TAG_BOOTSTRAP: u64 = 0x424f_4f54;
pub(crate) const TAG_KAPPA: u64 = 0x4b41_5050;
pub(crate) const TAG_ENSEMBLE: u64 = 0x454e_5345;
pub(crate) const TAG_FISHER: u64 = 0x4649_5348;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `path` into `master` to produce a 64-bit child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Returns the stream addressed by `path` under `master`.
pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}
