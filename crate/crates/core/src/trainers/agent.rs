use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Algorithm, TrainerConfig};
use crate::error::{check_len, Result};
use crate::nn::{squashed_gaussian_sample, AdamState, MlpParams};
use crate::replay::ReplayBuffer;
use crate::scalar::Scalar;

/// Observation and action widths of every agent, which fix the layout of the
/// centralized critic input `[o_1 .. o_N, a_1 .. a_N]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointLayout {
    pub obs_dims: Vec<usize>,
    pub act_dims: Vec<usize>,
}

impl JointLayout {
    pub fn uniform(n_agents: usize, obs_dim: usize, act_dim: usize) -> Self {
        Self {
            obs_dims: vec![obs_dim; n_agents],
            act_dims: vec![act_dim; n_agents],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.obs_dims.len()
    }

    pub fn width(&self) -> usize {
        self.obs_dims.iter().sum::<usize>() + self.act_dims.iter().sum::<usize>()
    }

    pub fn obs_offset(&self, j: usize) -> usize {
        self.obs_dims[..j].iter().sum()
    }

    pub fn act_offset(&self, j: usize) -> usize {
        self.obs_dims.iter().sum::<usize>() + self.act_dims[..j].iter().sum::<usize>()
    }
}

/// Parameter count of a critic over `layout`: three dense layers with biases.
pub fn critic_param_count(layout: &JointLayout, hidden: usize) -> usize {
    let d = layout.width();
    (d * hidden + hidden) + (hidden * hidden + hidden) + (hidden + 1)
}

/// Everything one agent owns: online and target networks, their optimizers,
/// and its replay buffer.
#[derive(Clone, Debug)]
pub struct AgentBundle<S> {
    pub actor: MlpParams<S>,
    pub critic: MlpParams<S>,
    pub target_actor: MlpParams<S>,
    pub target_critic: MlpParams<S>,
    pub actor_opt: AdamState<S>,
    pub critic_opt: AdamState<S>,
    pub buffer: ReplayBuffer<S>,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub soft_updates: u64,
    /// Sequence numbers of the most recent critic step, actor step and soft
    /// update, drawn from one counter per update round.
    pub last_steps: UpdateSequence,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateSequence {
    pub critic: u64,
    pub actor: u64,
    pub soft_update: u64,
}

impl<S: Scalar> AgentBundle<S> {
    pub fn new<R: Rng + ?Sized>(
        agent: usize,
        layout: &JointLayout,
        config: &TrainerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let obs_dim = layout.obs_dims[agent];
        let act_dim = layout.act_dims[agent];
        let actor_out = match config.algorithm {
            Algorithm::Maddpg => act_dim,
            Algorithm::Masac => 2 * act_dim,
        };
        let actor = MlpParams::init(obs_dim, config.hidden, actor_out, rng)?;
        let critic = MlpParams::init(layout.width(), config.hidden, 1, rng)?;
        let lr = S::lit(config.lr);
        Ok(Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor_opt: AdamState::new(&actor, lr),
            critic_opt: AdamState::new(&critic, lr),
            actor,
            critic,
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            obs_dim,
            act_dim,
            soft_updates: 0,
            last_steps: UpdateSequence::default(),
        })
    }
}

fn standard_normal<S: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<S> {
    (0..n)
        .map(|_| S::lit(StandardNormal.sample(rng)))
        .collect()
}

/// Local action from the agent's own observation.
///
/// MADDPG: `tanh(actor(obs))` plus Gaussian noise when exploring, clamped to
/// `[-1, 1]`. MASAC: a squashed Gaussian sample when exploring, the squashed
/// mean otherwise.
pub fn select_action<S: Scalar, R: Rng + ?Sized>(
    bundle: &AgentBundle<S>,
    obs: &[S],
    explore: bool,
    algorithm: Algorithm,
    exploration_sigma: f64,
    rng: &mut R,
) -> Result<Vec<S>> {
    check_len("observation length", bundle.obs_dim, obs.len())?;
    let (out, _) = bundle.actor.forward(obs)?;
    let act_dim = bundle.act_dim;
    match algorithm {
        Algorithm::Maddpg => {
            let mut a: Vec<S> = out.iter().map(|x| x.tanh()).collect();
            if explore && exploration_sigma > 0.0 {
                let sigma = S::lit(exploration_sigma);
                let noise: Vec<S> = standard_normal(rng, act_dim);
                for (x, n) in a.iter_mut().zip(noise) {
                    *x = (*x + sigma * n).max(-S::one()).min(S::one());
                }
            }
            Ok(a)
        }
        Algorithm::Masac => {
            let (mean, log_std) = out.split_at(act_dim);
            if explore {
                let noise = standard_normal(rng, act_dim);
                Ok(squashed_gaussian_sample(mean, log_std, &noise)?.action)
            } else {
                Ok(mean.iter().map(|x| x.tanh()).collect())
            }
        }
    }
}

pub(crate) fn noise_matrix<S: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> crate::nn::Matrix<S> {
    crate::nn::Matrix::from_vec(rows, cols, standard_normal(rng, rows * cols)).expect("sized")
}
