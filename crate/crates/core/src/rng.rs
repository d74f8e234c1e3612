//! Seeded random streams.
//!
//! Every consumer of randomness asks for a stream keyed by the user seed
//! plus a small tuple of tags (bag index, repeat, class, trial ...). The
//! generator is ChaCha8, which is counter based: independent streams are
//! selected with `set_stream`, so results never depend on the order in
//! which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `seed` tagged by `tags`. Distinct tag tuples give distinct
/// streams; the same `(seed, tags)` always gives the same sequence.
pub fn stream(seed: u64, tags: &[u64]) -> Rng {
    let mut id = splitmix64(tags.len() as u64);
    for &t in tags {
        id = splitmix64(id ^ t);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

// Domain tags so that, e.g., bag 0 and split repeat 0 never share a stream.
pub(crate) const TAG_SPLIT: u64 = 1;
pub(crate) const TAG_LABEL_SUBSET: u64 = 2;
pub(crate) const TAG_BAG: u64 = 3;
pub(crate) const TAG_INNER_BAG: u64 = 4;
pub(crate) const TAG_TPE: u64 = 5;
pub(crate) const TAG_AE_INIT: u64 = 6;
pub(crate) const TAG_AE_SHUFFLE: u64 = 7;
pub(crate) const TAG_PERTURB: u64 = 8;
pub(crate) const TAG_VALIDATION: u64 = 9;
