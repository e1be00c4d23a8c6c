//! Counter-based randomness.
//!
//! Every coin used by the dynamics is a pure function of
//! `(seed, domain, step, index)`, so a trajectory can be replayed from any
//! step without carrying generator state, and results do not depend on
//! thread count or evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Independent coin families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    /// Conflict coins of the exclusion step.
    Exclusion = 0x51,
    /// Tall-tall bond coins of the stack step.
    Stack = 0xA7,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngContext {
    pub seed: u64,
    pub step: u64,
}

impl RngContext {
    pub fn new(seed: u64) -> Self {
        Self { seed, step: 0 }
    }

    pub fn at_step(self, step: u64) -> Self {
        Self { step, ..self }
    }

    pub fn advance(&mut self) {
        self.step += 1;
    }

    /// 64 fair bits covering indices `64 * block .. 64 * block + 63`.
    pub fn coin_word(&self, domain: Domain, block: u64) -> u64 {
        mix4(self.seed, domain as u64, self.step, block)
    }

    pub fn coin(&self, domain: Domain, index: u64) -> bool {
        (self.coin_word(domain, index >> 6) >> (index & 63)) & 1 == 1
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix4(a: u64, b: u64, c: u64, d: u64) -> u64 {
    let mut h = splitmix(a);
    h = splitmix(h ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    h = splitmix(h ^ c);
    splitmix(h ^ d.rotate_left(17))
}

/// Seeded stream for the samplers; `label` separates uses and `index`
/// separates replicas.
pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let tag = label
        .bytes()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3));
    ChaCha8Rng::seed_from_u64(mix4(seed, tag, index, 0x5EED))
}
