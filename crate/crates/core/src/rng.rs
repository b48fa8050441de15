//! Counter-based splittable random streams.
//!
//! Every random draw in an ensemble is addressed by `(seed, trajectory,
//! branch, lane)`. The ChaCha key is derived from `(seed, trajectory, lane)`
//! and the ChaCha stream id is the branch index, so any trajectory can be
//! regenerated in isolation and the ensemble result never depends on the
//! order or thread on which trajectories are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent purposes a single trajectory draws randomness for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    /// Jump sampling during the stochastic evolution.
    Dynamics = 1,
    /// Initial and final projective measurements.
    Measurement = 2,
    /// Virtual (non-disturbing) Born draws used for intermediate ΔS_tot traces.
    Virtual = 3,
    /// Bootstrap resampling of ensemble estimators.
    Bootstrap = 4,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Address of one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub seed: u64,
    pub trajectory: u64,
    pub branch: u64,
}

impl StreamId {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        Self {
            seed,
            trajectory,
            branch: 0,
        }
    }

    pub fn with_branch(self, branch: u64) -> Self {
        Self { branch, ..self }
    }

    /// Compact 64-bit tag stored on records so a dump can be traced back to
    /// the stream that produced it.
    pub fn tag(&self) -> u64 {
        splitmix64(splitmix64(splitmix64(self.seed) ^ self.trajectory) ^ self.branch)
    }

    pub fn rng(&self, lane: Lane) -> StreamRng {
        let mut key = [0u8; 32];
        let mut state = splitmix64(self.seed ^ 0x5155_414E_545F_4D41);
        state = splitmix64(state ^ self.trajectory);
        state = splitmix64(state ^ lane as u64);
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.branch);
        rng
    }
}
