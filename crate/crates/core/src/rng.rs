//! Random number sources.
//!
//! Channel draws come from [`CounterRng`], a stateless generator keyed by
//! `(seed, frame, link)`: a draw depends only on its key, so a protocol that
//! inspects a subset of links sees exactly the values an eager pass over all
//! links would have produced. Everything else (mobility, arrivals, contention)
//! uses independent ChaCha streams derived from the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const LINK_MUL: u64 = 0xC2B2_AE3D_27D4_EB4F;

#[inline(always)]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless keyed generator for per-frame, per-link draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: splitmix64(seed ^ 0x6C69_6E6B_5F72_6E67) }
    }

    #[inline]
    pub fn u64_at(&self, frame: u64, link: u64) -> u64 {
        let x = splitmix64(self.key ^ frame.wrapping_mul(GOLDEN));
        splitmix64(x ^ link.wrapping_mul(LINK_MUL))
    }

    /// Uniform on `(0, 1]`, so `-ln(u)` is always finite.
    #[inline]
    pub fn uniform_at(&self, frame: u64, link: u64) -> f64 {
        ((self.u64_at(frame, link) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Independent sequential streams of one replication.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Placement = 1,
    Mobility = 2,
    Arrivals = 3,
    Contention = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
