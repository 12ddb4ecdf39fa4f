use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::agent::AgentBundle;
use super::TrainerConfig;
use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::MlpParams;
use crate::scalar::Scalar;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;
const NETWORKS: [&str; 4] = ["actor", "critic", "target_actor", "target_critic"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub schema_version: u32,
    pub scalar_bytes: usize,
    pub n_agents: usize,
    pub trainer: TrainerConfig,
    pub env: EnvConfig,
    /// Blob file names, `files[agent]` in [`NETWORKS`] order.
    pub files: Vec<Vec<String>>,
}

fn networks<S>(a: &AgentBundle<S>) -> [&MlpParams<S>; 4] {
    [&a.actor, &a.critic, &a.target_actor, &a.target_critic]
}

/// Writes one blob per network plus `manifest.json` into `dir`.
pub fn save_checkpoint<S: Scalar>(
    dir: &Path,
    agents: &[AgentBundle<S>],
    trainer: &TrainerConfig,
    env: &EnvConfig,
) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(agents.len());
    for (i, agent) in agents.iter().enumerate() {
        let mut names = Vec::with_capacity(NETWORKS.len());
        for (name, net) in NETWORKS.iter().zip(networks(agent)) {
            let file = format!("agent{i}_{name}.bin");
            fs::write(dir.join(&file), net.to_bytes())?;
            names.push(file);
        }
        files.push(names);
    }
    let manifest = CheckpointManifest {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        scalar_bytes: S::BYTES,
        n_agents: agents.len(),
        trainer: trainer.clone(),
        env: env.clone(),
        files,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "checkpoint schema {} (expected {CHECKPOINT_SCHEMA_VERSION})",
            manifest.schema_version
        )));
    }
    if manifest.files.len() != manifest.n_agents || manifest.files.iter().any(|f| f.len() != NETWORKS.len()) {
        return Err(Error::Format("checkpoint manifest file list is malformed".into()));
    }
    Ok(manifest)
}

/// Overwrites the networks of `agents` from a checkpoint directory.
/// Optimizer state and buffers are left untouched.
pub fn load_checkpoint<S: Scalar>(dir: &Path, agents: &mut [AgentBundle<S>]) -> Result<CheckpointManifest> {
    let manifest = read_manifest(dir)?;
    if manifest.n_agents != agents.len() {
        return Err(Error::Shape {
            context: "checkpoint agent count",
            expected: agents.len(),
            got: manifest.n_agents,
        });
    }
    for (agent, names) in agents.iter_mut().zip(&manifest.files) {
        let mut loaded = Vec::with_capacity(NETWORKS.len());
        for (name, current) in names.iter().zip(networks(agent)) {
            let net = MlpParams::<S>::from_bytes(&fs::read(dir.join(name))?)?;
            if !net.same_shape(&current.layers) {
                return Err(Error::Format(format!("{name}: network shape differs from the trainer")));
            }
            loaded.push(net);
        }
        let mut it = loaded.into_iter();
        agent.actor = it.next().expect("four networks");
        agent.critic = it.next().expect("four networks");
        agent.target_actor = it.next().expect("four networks");
        agent.target_critic = it.next().expect("four networks");
    }
    Ok(manifest)
}
