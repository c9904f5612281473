//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by
//! `(seed, domain, replicate, unit)`. Work can therefore be split across
//! threads in any order and still reproduce a serial run bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tag mixed into the key so unrelated uses of one seed never share
/// a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Simulation = 1,
    FixedFrailty = 2,
    ConditionalBootstrap = 3,
    ParametricBootstrap = 4,
    FrailtyBootstrap = 5,
    Study = 6,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for a sub-computation, e.g. one bootstrap replicate.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain as u64)) ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Independent generator for `(seed, domain, replicate, unit)`.
///
/// The key depends on `(seed, domain)`; the replicate selects the ChaCha
/// stream and the unit (usually a subject index) the block offset, giving
/// each unit 2^36 blocks before overlap.
pub fn substream(seed: u64, domain: Domain, replicate: u64, unit: u64) -> StreamRng {
    let mut key = [0u8; 32];
    let mut s = seed ^ splitmix64(domain as u64);
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate);
    rng.set_word_pos(u128::from(unit) << 40);
    rng
}
