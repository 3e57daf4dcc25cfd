//! Keyed random streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream whose 256-bit key is
//! the tuple (master seed, component tag, a, b). Streams for different keys are
//! independent, so a draw never depends on how many draws other components
//! made before it. This is what keeps mobility and application assignment
//! identical across privacy levels of one seed while obfuscation noise stays
//! independent per level, and lets runs proceed in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Component tags; part of the stream key.
pub mod tag {
    pub const BASE_STATIONS: u64 = 0x4253;
    pub const MEC_HOSTS: u64 = 0x4d48;
    pub const MOBILITY: u64 = 0x4d4f_4249;
    pub const APPLICATIONS: u64 = 0x4150_5053;
    /// Obfuscation streams are additionally keyed by the epsilon bits, see
    /// [`crate::privacy::PrivacyMechanism`].
    pub const PRIVACY: u64 = 0x5052_4956;
    pub const DIAGNOSTIC: u64 = 0x4449_4147;
}

pub fn keyed(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
