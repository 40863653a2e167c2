//! Seeded random streams.
//!
//! Every stream is ChaCha8 (`rand_chacha` 0.9.0, pinned in the manifest),
//! keyed by a 32-byte seed built from `(master, cell, rep)` so that distinct
//! keys always give distinct streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name and version of the generator behind every sampler.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9.0)";

const DOMAIN_TAG: u64 = 0x6576_6d69_785f_7631; // "evmix_v1"

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedKey {
    pub master: u64,
    pub cell: u64,
    pub rep: u64,
}

impl SeedKey {
    pub fn new(master: u64, cell: u64, rep: u64) -> Self {
        SeedKey { master, cell, rep }
    }

    /// Key for a plain integer seed.
    pub fn from_seed(seed: u64) -> Self {
        SeedKey::new(seed, 0, 0)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        bytes[0..8].copy_from_slice(&self.master.to_le_bytes());
        bytes[8..16].copy_from_slice(&self.cell.to_le_bytes());
        bytes[16..24].copy_from_slice(&self.rep.to_le_bytes());
        bytes[24..32].copy_from_slice(&DOMAIN_TAG.to_le_bytes());
        ChaCha8Rng::from_seed(bytes)
    }
}

/// Uniform draw on the open interval (0, 1) with 53 bits of resolution.
pub fn open_unit<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
