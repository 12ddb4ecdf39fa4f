use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{select_action, AgentBundle, JointLayout};
use super::update::{update_all_trainers, UpdateCounters};
use super::TrainerConfig;
use crate::envs::{self, EnvConfig, Observation, WorldState};
use crate::error::{check_len, Result};
use crate::profiler::{PhaseId, ProfileReport, Profiler, ReportMeta};
use crate::replay::{make_sampler, IndexSampler};
use crate::scalar::Scalar;

/// `sum_t gamma^t r_t`.
pub fn discounted_return<S: Scalar>(rewards: &[S], gamma: S) -> S {
    rewards
        .iter()
        .rev()
        .fold(S::zero(), |acc, &r| r + gamma * acc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Per-agent sum of step rewards.
    pub agent_rewards: Vec<f64>,
    /// Mean over agents of `agent_rewards`.
    pub mean_reward: f64,
    pub wall_ms: f64,
}

impl EpisodeStats {
    pub fn csv_header(n_agents: usize) -> String {
        let mut h = String::from("episode,mean_episode_reward");
        for i in 0..n_agents {
            h.push_str(&format!(",agent_{i}"));
        }
        h.push_str(",wall_ms");
        h
    }

    pub fn csv_row(&self) -> String {
        let mut row = format!("{},{}", self.episode, self.mean_reward);
        for r in &self.agent_rewards {
            row.push_str(&format!(",{r}"));
        }
        row.push_str(&format!(",{:.3}", self.wall_ms));
        row
    }
}

pub fn write_stats_csv<W: Write>(mut out: W, stats: &[EpisodeStats]) -> std::io::Result<()> {
    let n = stats.first().map_or(0, |s| s.agent_rewards.len());
    writeln!(out, "{}", EpisodeStats::csv_header(n))?;
    for s in stats {
        writeln!(out, "{}", s.csv_row())?;
    }
    Ok(())
}

fn select_all<S: Scalar>(
    agents: &[AgentBundle<S>],
    config: &TrainerConfig,
    obs: &[Observation<S>],
    explore: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<S>>> {
    check_len("observation count", agents.len(), obs.len())?;
    agents
        .iter()
        .zip(obs)
        .map(|(a, o)| select_action(a, o, explore, config.algorithm, config.exploration_sigma, rng))
        .collect()
}

/// Episodic training loop over one environment and `N` agents.
pub struct Trainer<S: Scalar> {
    pub config: TrainerConfig,
    pub env_config: EnvConfig,
    pub layout: JointLayout,
    pub agents: Vec<AgentBundle<S>>,
    pub counters: UpdateCounters,
    sampler: Box<dyn IndexSampler>,
    rng: ChaCha8Rng,
    env_rng: ChaCha8Rng,
    profiler: Profiler,
    steps: u64,
    episodes_done: usize,
}

impl<S: Scalar> Trainer<S> {
    pub fn new(config: TrainerConfig, env_config: EnvConfig) -> Result<Self> {
        config.validate()?;
        env_config.validate()?;
        let layout = JointLayout::uniform(env_config.n_learners, env_config.obs_dim(), EnvConfig::ACTION_DIM);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let agents = (0..env_config.n_learners)
            .map(|i| AgentBundle::new(i, &layout, &config, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut env_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(env_config.seed));
        env_rng.set_stream(1);
        let mut extra = std::collections::BTreeMap::new();
        extra.insert("episodes".into(), config.episodes.to_string());
        extra.insert("seed".into(), config.seed.to_string());
        extra.insert("batch_size".into(), config.batch_size.to_string());
        extra.insert("neighbors".into(), config.neighbors.to_string());
        extra.insert("scalar".into(), std::any::type_name::<S>().to_string());
        let profiler = Profiler::new(ReportMeta {
            n_agents: env_config.n_learners,
            algorithm: config.algorithm.to_string(),
            sampler: config.sampler.to_string(),
            scenario: env_config.scenario.to_string(),
            extra,
        });
        Ok(Self {
            sampler: make_sampler(config.sampler, config.neighbors)?,
            config,
            env_config,
            layout,
            agents,
            counters: UpdateCounters::default(),
            rng,
            env_rng,
            profiler,
            steps: 0,
            episodes_done: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn profiler(&self) -> &Profiler {
        &self.profiler
    }


    pub fn run_episode(&mut self) -> Result<EpisodeStats> {
        let started = Instant::now();
        let n = self.agents.len();
        let (mut state, mut obs): (WorldState<S>, _) = {
            let _s = self.profiler.scope(PhaseId::Other);
            envs::reset(&self.env_config, &mut self.env_rng)?
        };
        let mut sums = vec![0.0f64; n];
        loop {
            let actions = {
                let _s = self.profiler.scope(PhaseId::ActionSelection);
                select_all(&self.agents, &self.config, &obs, true, &mut self.rng)?
            };
            let out = {
                let _s = self.profiler.scope(PhaseId::EnvStep);
                envs::step(&mut state, &actions, &self.env_config)?
            };
            {
                let _s = self.profiler.scope(PhaseId::ExperienceCollection);
                let stored_done = out.done && self.config.mask_time_limit;
                for (i, agent) in self.agents.iter_mut().enumerate() {
                    agent
                        .buffer
                        .push(&obs[i], &actions[i], out.rewards[i], &out.observations[i], stored_done)?;
                    sums[i] += out.rewards[i].as_f64();
                }
            }
            self.steps += 1;
            if self.steps % self.config.update_every as u64 == 0 {
                update_all_trainers(
                    &mut self.agents,
                    &self.layout,
                    &self.config,
                    self.sampler.as_ref(),
                    &mut self.rng,
                    &self.profiler,
                    &mut self.counters,
                )?;
            }
            obs = out.observations;
            if out.done {
                break;
            }
        }
        let stats = EpisodeStats {
            episode: self.episodes_done,
            mean_reward: sums.iter().sum::<f64>() / n as f64,
            agent_rewards: sums,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        self.episodes_done += 1;
        Ok(stats)
    }

    /// Runs `config.episodes` episodes, calling `on_episode` after each.
    pub fn run(&mut self, mut on_episode: impl FnMut(&EpisodeStats)) -> Result<Vec<EpisodeStats>> {
        let mut all = Vec::with_capacity(self.config.episodes);
        for _ in 0..self.config.episodes {
            let s = self.run_episode()?;
            on_episode(&s);
            all.push(s);
        }
        Ok(all)
    }

    /// Greedy (noise-free) actions for the current observations.
    pub fn act(&mut self, obs: &[Observation<S>]) -> Result<Vec<Vec<S>>> {
        select_all(&self.agents, &self.config, obs, false, &mut self.rng)
    }

    pub fn report(&self) -> ProfileReport {
        self.profiler.snapshot()
    }
}

pub struct TrainingOutcome<S: Scalar> {
    pub stats: Vec<EpisodeStats>,
    pub report: ProfileReport,
    pub counters: UpdateCounters,
    pub trainer: Trainer<S>,
}

pub fn run_training<S: Scalar>(config: &TrainerConfig, env_config: &EnvConfig) -> Result<TrainingOutcome<S>> {
    let mut trainer = Trainer::new(config.clone(), env_config.clone())?;
    let stats = trainer.run(|_| {})?;
    Ok(TrainingOutcome {
        stats,
        report: trainer.report(),
        counters: trainer.counters,
        trainer,
    })
}
