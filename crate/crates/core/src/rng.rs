//! Counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of a master seed,
//! a replicate index and a per-item index (a prime's position in the table,
//! a path number, a tree node). Nothing depends on the order in which work is
//! scheduled, so parallel and sequential runs produce identical values.

use rand::RngCore;
use std::f64::consts::TAU;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a stream key from a seed, a replicate and an item index.
#[inline]
pub fn stream_key(seed: u64, replicate: u64, item: u64) -> u64 {
    let a = mix64(seed.wrapping_add(GOLDEN));
    let b = mix64(a ^ replicate.wrapping_mul(0xd1b5_4a32_d192_ed03));
    mix64(b ^ item.wrapping_mul(0x8cb9_2ba7_2f3d_8dd7))
}

/// Map 64 random bits to a double in [0, 1).
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform angle in [0, 2pi) for item `item` of replicate `replicate`.
///
/// Equal to the first angle drawn from [`CounterRng::new`] with the same
/// arguments.
#[inline]
pub fn uniform_angle(seed: u64, replicate: u64, item: u64) -> f64 {
    let theta = TAU * unit_f64(mix64(stream_key(seed, replicate, item)));
    if theta >= TAU {
        0.0
    } else {
        theta
    }
}

/// A SplitMix64 stream anchored at a derived key. The `i`-th output is
/// `mix64(key + i * GOLDEN)`, so any position is directly addressable.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, replicate: u64, item: u64) -> Self {
        Self::from_key(stream_key(seed, replicate, item))
    }

    pub fn from_key(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    /// Jump to an absolute position in the stream.
    pub fn seek(&mut self, position: u64) {
        self.counter = position;
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let out = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter = self.counter.wrapping_add(1);
        out
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
