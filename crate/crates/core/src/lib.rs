//! Multi-agent actor-critic training with a phase-level profiler and
//! locality-aware replay sampling.

pub mod envs;
pub mod error;
pub mod nn;
pub mod profiler;
pub mod replay;
pub mod scalar;
pub mod trainers;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type MlpParams64 = nn::MlpParams<f64>;
pub type MlpParams32 = nn::MlpParams<f32>;
pub type ReplayBuffer64 = replay::ReplayBuffer<f64>;
pub type ReplayBuffer32 = replay::ReplayBuffer<f32>;
pub type Trainer64 = trainers::Trainer<f64>;
pub type Trainer32 = trainers::Trainer<f32>;
