//! Seed-derived random streams.
//!
//! Every sampler in this crate draws from a stream keyed by
//! `(seed, purpose tag, index)`. The key is mixed into a 256-bit ChaCha seed,
//! so the draws for one edge/vertex/replicate never depend on the order in
//! which other objects are visited. Identical keys give identical streams,
//! which is what makes sampled objects byte-for-byte reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags separating the independent streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    /// Edge presence indicator for a vertex pair or block pair.
    EdgePresence,
    /// Weight draw for a present edge.
    EdgeWeight,
    /// Edge label draw (labeled block models).
    EdgeLabel,
    /// Offspring counts and child marks of one tree node.
    TreeNode,
    /// Starting vector of an iterative eigensolver.
    SolverInit,
    /// Monte-Carlo replicate.
    Replicate,
    /// k-means restart.
    KmeansRestart,
    /// Generic test/benchmark draws.
    Misc,
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::EdgePresence => 0x01,
            StreamTag::EdgeWeight => 0x02,
            StreamTag::EdgeLabel => 0x03,
            StreamTag::TreeNode => 0x04,
            StreamTag::SolverInit => 0x05,
            StreamTag::Replicate => 0x06,
            StreamTag::KmeansRestart => 0x07,
            StreamTag::Misc => 0x08,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `(seed, tag, a, b)` into a single well-scrambled 64-bit value.
pub fn mix(seed: u64, tag: StreamTag, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(seed ^ 0x6a09_e667_f3bc_c908);
    h = splitmix64(h ^ tag.code());
    h = splitmix64(h ^ a);
    splitmix64(h ^ b)
}

/// A ChaCha stream keyed by `(seed, tag, a, b)`.
pub fn stream(seed: u64, tag: StreamTag, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut h = mix(seed, tag, a, b);
    for chunk in key.chunks_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform in `[0, 1)` from a single mixed key; cheaper than a full stream
/// when only one draw is needed (edge presence indicators).
pub fn uniform_u01(seed: u64, tag: StreamTag, a: u64, b: u64) -> f64 {
    // 53 random mantissa bits.
    (mix(seed, tag, a, b) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Poisson draw by inversion of the product of uniforms (Knuth); exact for
/// the moderate means used by the tree samplers. `cap` bounds the draw.
pub fn poisson(rng: &mut ChaCha8Rng, mean: f64, cap: usize) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let limit = (-mean).exp();
    let mut k = 0usize;
    let mut prod = 1.0f64;
    loop {
        prod *= rng.gen::<f64>();
        if prod <= limit || k >= cap {
            return k;
        }
        k += 1;
    }
}

/// Standard normal via Box-Muller.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
