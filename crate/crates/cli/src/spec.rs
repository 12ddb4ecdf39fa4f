//! Experiment description: one training configuration swept over agent
//! counts and seeds.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use marl_core::envs::{EnvConfig, Scenario};
use marl_core::trainers::TrainerConfig;
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const SCHEMA_VERSION: u32 = 1;

/// Optional environment constants applied on top of the scenario defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvOverrides {
    pub n_prey: Option<usize>,
    pub n_landmarks: Option<usize>,
    pub dt: Option<f64>,
    pub damping: Option<f64>,
    pub max_speed: Option<f64>,
    pub max_episode_length: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub scenario: Scenario,
    /// Agent counts to sweep.
    pub agents: Vec<usize>,
    /// One repetition per seed.
    pub seeds: Vec<u64>,
    pub trainer: TrainerConfig,
    pub env: EnvOverrides,
    pub out: PathBuf,
    pub checkpoints: bool,
    /// Worker threads; each runs whole cells.
    pub jobs: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: Scenario::CoopNav,
            agents: vec![3, 6, 12],
            seeds: vec![0],
            trainer: TrainerConfig::default(),
            env: EnvOverrides::default(),
            out: PathBuf::from("runs"),
            checkpoints: true,
            jobs: 1,
        }
    }
}

/// One (agent count, seed) training run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub n_agents: usize,
    pub seed: u64,
}

impl Cell {
    pub fn dir_name(self) -> String {
        format!("n{}_seed{}", self.n_agents, self.seed)
    }

    pub fn parse_dir_name(name: &str) -> Option<Self> {
        let rest = name.strip_prefix('n')?;
        let (n, seed) = rest.split_once("_seed")?;
        Some(Self {
            n_agents: n.parse().ok()?,
            seed: seed.parse().ok()?,
        })
    }
}

/// Everything needed to rerun one cell, written next to its artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub schema_version: u32,
    pub n_agents: usize,
    pub seed: u64,
    pub trainer: TrainerConfig,
    pub env: EnvConfig,
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec: Self = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        Ok(spec)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(UsageError(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ))
            .into());
        }
        if self.agents.is_empty() || self.agents.contains(&0) {
            return Err(UsageError("agent sweep must be non-empty with every value >= 1".into()).into());
        }
        if self.seeds.is_empty() {
            return Err(UsageError("at least one seed (repetition) is required".into()).into());
        }
        if self.jobs == 0 {
            return Err(UsageError("jobs must be at least 1".into()).into());
        }
        self.trainer.validate().map_err(|e| UsageError(e.to_string()))?;
        for &n in &self.agents {
            self.env_config(Cell { n_agents: n, seed: 0 })
                .validate()
                .map_err(|e| UsageError(e.to_string()))?;
        }
        Ok(())
    }

    /// Cartesian product of the sweep and the seeds, sweep-major.
    pub fn cells(&self) -> Vec<Cell> {
        self.agents
            .iter()
            .flat_map(|&n_agents| self.seeds.iter().map(move |&seed| Cell { n_agents, seed }))
            .collect()
    }

    pub fn env_config(&self, cell: Cell) -> EnvConfig {
        let mut env = EnvConfig::for_scenario(self.scenario, cell.n_agents);
        let o = &self.env;
        if let Some(m) = o.n_prey {
            env.n_prey = m;
        }
        if let Some(l) = o.n_landmarks {
            env.n_landmarks = l;
        }
        if let Some(dt) = o.dt {
            env.dt = dt;
        }
        if let Some(d) = o.damping {
            env.damping = d;
        }
        if let Some(s) = o.max_speed {
            env.max_speed = s;
        }
        if let Some(t) = o.max_episode_length {
            env.max_episode_length = t;
        }
        env.seed = cell.seed;
        env
    }

    pub fn cell_config(&self, cell: Cell) -> CellConfig {
        CellConfig {
            schema_version: SCHEMA_VERSION,
            n_agents: cell.n_agents,
            seed: cell.seed,
            trainer: TrainerConfig {
                seed: cell.seed,
                ..self.trainer.clone()
            },
            env: self.env_config(cell),
        }
    }

    pub fn cell_dir(&self, cell: Cell) -> PathBuf {
        self.out.join(cell.dir_name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_are_the_cartesian_product() {
        let spec = ExperimentSpec {
            agents: vec![3, 6],
            seeds: vec![1, 2],
            ..Default::default()
        };
        let cells = spec.cells();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[1], Cell { n_agents: 3, seed: 2 });
        assert_eq!(cells[2], Cell { n_agents: 6, seed: 1 });
    }

    #[test]
    fn dir_names_round_trip() {
        let c = Cell { n_agents: 12, seed: 40 };
        assert_eq!(c.dir_name(), "n12_seed40");
        assert_eq!(Cell::parse_dir_name("n12_seed40"), Some(c));
        assert_eq!(Cell::parse_dir_name("seed40"), None);
        assert_eq!(Cell::parse_dir_name("n3_seedx"), None);
    }

    #[test]
    fn cell_config_carries_the_seed_everywhere() {
        let spec = ExperimentSpec {
            scenario: Scenario::PredatorPrey,
            env: EnvOverrides { n_prey: Some(2), ..Default::default() },
            ..Default::default()
        };
        let cfg = spec.cell_config(Cell { n_agents: 4, seed: 9 });
        assert_eq!(cfg.trainer.seed, 9);
        assert_eq!(cfg.env.seed, 9);
        assert_eq!(cfg.env.n_learners, 4);
        assert_eq!(cfg.env.n_prey, 2);
    }

    #[test]
    fn validation_rejects_bad_sweeps() {
        for bad in [
            ExperimentSpec { agents: vec![], ..Default::default() },
            ExperimentSpec { agents: vec![3, 0], ..Default::default() },
            ExperimentSpec { seeds: vec![], ..Default::default() },
            ExperimentSpec { schema_version: 7, ..Default::default() },
            ExperimentSpec {
                trainer: TrainerConfig { gamma: 2.0, ..Default::default() },
                ..Default::default()
            },
        ] {
            let err = bad.validate().unwrap_err();
            assert!(err.downcast_ref::<UsageError>().is_some(), "{err}");
        }
        ExperimentSpec::default().validate().unwrap();
    }

    #[test]
    fn partial_config_files_fill_defaults() {
        let spec: ExperimentSpec =
            serde_json::from_str(r#"{"schema_version": 1, "agents": [3], "trainer": {"episodes": 50}}"#).unwrap();
        assert_eq!(spec.trainer.episodes, 50);
        assert_eq!(spec.trainer.batch_size, 1024);
        assert_eq!(spec.seeds, vec![0]);
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"agnets": [3]}"#).is_err());
    }
}
