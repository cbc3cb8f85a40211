//! Counter-based randomness shared by all players of a trial.
//!
//! Every draw is a pure function of (seed, domain, trial, index), so trials can be
//! replayed or evaluated in any order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Source of the shared uniform c and the per-level grounding uniforms U_L.
pub trait SignalSource: Send + Sync {
    /// The shared uniform used to correlate actions.
    fn c(&self, trial: u64) -> f64;
    /// The grounding uniform at recursion level `level` (levels start at 1).
    fn u_level(&self, trial: u64, level: u64) -> f64;
}

const PROTOCOL: u64 = 0;
const TYPES: u64 = 1;
const AUX: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomizationSignal {
    pub seed: u64,
}

impl RandomizationSignal {
    pub fn new(seed: u64) -> Self {
        RandomizationSignal { seed }
    }

    fn word(&self, domain: u64, trial: u64, index: u64) -> u64 {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&domain.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(trial);
        rng.set_word_pos(u128::from(index) * 2);
        rng.next_u64()
    }

    /// Uniform used to sample the type profile of a trial.
    pub fn type_uniform(&self, trial: u64) -> f64 {
        to_unit(self.word(TYPES, trial, 0))
    }

    /// Auxiliary uniform stream for callers that need extra per-trial randomness.
    pub fn aux_uniform(&self, trial: u64, index: u64) -> f64 {
        to_unit(self.word(AUX, trial, index))
    }
}

impl SignalSource for RandomizationSignal {
    fn c(&self, trial: u64) -> f64 {
        to_unit(self.word(PROTOCOL, trial, 0))
    }

    fn u_level(&self, trial: u64, level: u64) -> f64 {
        to_unit(self.word(PROTOCOL, trial, level))
    }
}

/// Maps 64 random bits to [0, 1) with 53-bit resolution.
pub fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Signal whose grounding uniforms are shifted by a fixed number of levels.
///
/// Level L of the wrapper reads level L + `shift` of the inner source.
pub struct ShiftedSignal<S> {
    pub inner: S,
    pub shift: u64,
}

impl<S: SignalSource> SignalSource for ShiftedSignal<S> {
    fn c(&self, trial: u64) -> f64 {
        self.inner.c(trial)
    }

    fn u_level(&self, trial: u64, level: u64) -> f64 {
        self.inner.u_level(trial, level + self.shift)
    }
}

/// Signal with explicitly listed values, for tests and replays.
#[derive(Clone, Debug, Default)]
pub struct FixedSignal {
    pub c: f64,
    /// U_1, U_2, ...; levels past the end read `tail`.
    pub levels: Vec<f64>,
    pub tail: f64,
}

impl SignalSource for FixedSignal {
    fn c(&self, _trial: u64) -> f64 {
        self.c
    }

    fn u_level(&self, _trial: u64, level: u64) -> f64 {
        self.levels.get(level.saturating_sub(1) as usize).copied().unwrap_or(self.tail)
    }
}
