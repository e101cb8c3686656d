//! Counter-based splittable randomness.
//!
//! All stochastic routines in the crate draw from streams keyed by a small
//! tuple of integers (seed, stream id, counter, ...). A draw is a stateless
//! mix of the key, so the value consumed by chain `c` at sweep `s` for edge
//! `e` does not depend on scheduling or thread count.

use rand::RngCore;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a key of u64 parts into a single well-scrambled u64.
pub fn mix_key(parts: &[u64]) -> u64 {
    let mut acc = 0x243f_6a88_85a3_08d3u64;
    for (i, &p) in parts.iter().enumerate() {
        acc = splitmix(acc ^ splitmix(p.wrapping_add((i as u64 + 1).wrapping_mul(GAMMA))));
    }
    splitmix(acc)
}

/// Uniform value in [0, 1) addressed directly by a key, with no state.
pub fn keyed_uniform(parts: &[u64]) -> f64 {
    (mix_key(parts) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sequential generator seeded from a key. Implements [`rand::RngCore`] so the
/// usual distribution adaptors apply on top.
#[derive(Clone, Debug)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    pub fn from_key(parts: &[u64]) -> Self {
        StreamRng { state: mix_key(parts) }
    }

    pub fn next(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        splitmix(self.state)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    /// Uniform integer in [0, bound) by rejection from the top of the range.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let x = self.next();
            if x < zone {
                return x % bound;
            }
        }
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        (self.next() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
