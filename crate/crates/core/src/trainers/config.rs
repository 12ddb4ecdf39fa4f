use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::SamplerKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Maddpg,
    Masac,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Maddpg => "maddpg",
            Algorithm::Masac => "masac",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maddpg" => Ok(Algorithm::Maddpg),
            "masac" => Ok(Algorithm::Masac),
            other => Err(Error::Config(format!("unknown algorithm {other:?} (expected maddpg or masac)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    pub sampler: SamplerKind,
    pub neighbors: usize,
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Environment steps between update rounds.
    pub update_every: usize,
    pub entropy_alpha: f64,
    pub exploration_sigma: f64,
    /// Penalty on squared pre-squash actions in the policy loss; keeps the
    /// tanh head out of saturation early in training.
    pub policy_reg: f64,
    pub hidden: usize,
    pub buffer_capacity: usize,
    pub episodes: usize,
    /// When false, time-limit terminations are stored as non-terminal and bootstrapped.
    pub mask_time_limit: bool,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Maddpg,
            sampler: SamplerKind::Uniform,
            neighbors: 3,
            gamma: 0.95,
            tau: 0.01,
            lr: 0.01,
            batch_size: 1024,
            update_every: 100,
            entropy_alpha: 0.05,
            exploration_sigma: 0.1,
            policy_reg: 1e-3,
            hidden: crate::nn::DEFAULT_HIDDEN,
            buffer_capacity: 100_000,
            episodes: 2_000,
            mask_time_limit: true,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1".into());
        }
        if self.update_every < 1 {
            return fail("update_every must be at least 1".into());
        }
        if self.neighbors < 1 {
            return fail("neighbors must be at least 1".into());
        }
        if self.hidden < 1 || self.buffer_capacity < 1 {
            return fail("hidden and buffer_capacity must be positive".into());
        }
        if !(self.entropy_alpha >= 0.0) || !(self.exploration_sigma >= 0.0) || !(self.policy_reg >= 0.0) {
            return fail("entropy_alpha, exploration_sigma and policy_reg must be non-negative".into());
        }
        Ok(())
    }

    /// Minimum buffer length before an update round does any work.
    pub fn min_buffer_len(&self) -> usize {
        match self.sampler {
            SamplerKind::Uniform => self.batch_size,
            SamplerKind::Neighbor => self.batch_size.max(2 * self.neighbors + 1),
        }
    }
}
