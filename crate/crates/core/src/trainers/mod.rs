//! Centralized-critic MADDPG and MASAC trainers.

mod agent;
mod checkpoint;
mod config;
mod run;
mod update;

pub use agent::{critic_param_count, select_action, AgentBundle, JointLayout, UpdateSequence};
pub use checkpoint::{load_checkpoint, read_manifest, save_checkpoint, CheckpointManifest, CHECKPOINT_SCHEMA_VERSION};
pub use config::{Algorithm, TrainerConfig};
pub use run::{discounted_return, run_training, write_stats_csv, EpisodeStats, Trainer, TrainingOutcome};
pub use update::{
    actor_loss_and_grads, actor_update, ActorObjective, critic_loss_and_grads, critic_update, joint_input, replay_joint_input,
    target_q_calculation, target_y, update_all_trainers, AgentLosses, UpdateCounters,
};
