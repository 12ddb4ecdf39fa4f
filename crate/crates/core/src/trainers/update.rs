use rand::RngCore;

use super::agent::{noise_matrix, AgentBundle, JointLayout};
use super::{Algorithm, TrainerConfig};
use crate::error::{check_len, Error, Result};
use crate::nn::{soft_update, squashed_gaussian_backward, squashed_gaussian_sample, Matrix, MlpGrads, MlpParams};
use crate::profiler::{PhaseId, Profiler};
use crate::replay::{collect_joint, BatchArrays, IndexSampler};
use crate::scalar::Scalar;

/// Bootstrap targets `r + gamma * (1 - done) * q_next`.
pub fn target_y<S: Scalar>(rewards: &[S], dones: &[bool], target_q_next: &[S], gamma: S) -> Result<Vec<S>> {
    check_len("dones length", rewards.len(), dones.len())?;
    check_len("target_q_next length", rewards.len(), target_q_next.len())?;
    Ok(rewards
        .iter()
        .zip(dones)
        .zip(target_q_next)
        .map(|((&r, &d), &q)| if d { r } else { r + gamma * q })
        .collect())
}

/// Packs per-agent row blocks into critic inputs `[o_1 .. o_N, a_1 .. a_N]`.
pub fn joint_input<S: Scalar>(layout: &JointLayout, obs: &[&[S]], acts: &[&[S]], rows: usize) -> Result<Matrix<S>> {
    let n = layout.n_agents();
    check_len("joint obs blocks", n, obs.len())?;
    check_len("joint action blocks", n, acts.len())?;
    for j in 0..n {
        check_len("joint obs block", rows * layout.obs_dims[j], obs[j].len())?;
        check_len("joint action block", rows * layout.act_dims[j], acts[j].len())?;
    }
    let width = layout.width();
    let mut x = Matrix::zeros(rows, width);
    for k in 0..rows {
        let row = x.row_mut(k);
        let mut at = 0;
        for (j, o) in obs.iter().enumerate() {
            let d = layout.obs_dims[j];
            row[at..at + d].copy_from_slice(&o[k * d..(k + 1) * d]);
            at += d;
        }
        for (j, a) in acts.iter().enumerate() {
            let d = layout.act_dims[j];
            row[at..at + d].copy_from_slice(&a[k * d..(k + 1) * d]);
            at += d;
        }
    }
    Ok(x)
}

fn check_aligned<S: Scalar>(layout: &JointLayout, batches: &[BatchArrays<S>]) -> Result<usize> {
    if batches.len() != layout.n_agents() {
        return Err(Error::Alignment(format!(
            "{} batches for {} agents",
            batches.len(),
            layout.n_agents()
        )));
    }
    let b = batches.first().map_or(0, BatchArrays::len);
    if batches.iter().any(|x| x.len() != b) {
        return Err(Error::Alignment("joint batches differ in length".into()));
    }
    Ok(b)
}

/// Squashes a MASAC actor output `[mean, log_std]` row by row.
fn squash_rows<S: Scalar>(out: &Matrix<S>, act_dim: usize, noise: &Matrix<S>) -> Result<(Matrix<S>, Vec<S>)> {
    check_len("noise rows", out.rows(), noise.rows())?;
    check_len("noise width", act_dim, noise.cols())?;
    let mut actions = Matrix::zeros(out.rows(), act_dim);
    let mut log_probs = Vec::with_capacity(out.rows());
    for k in 0..out.rows() {
        let (mean, log_std) = out.row(k).split_at(act_dim);
        let s = squashed_gaussian_sample(mean, log_std, noise.row(k))?;
        actions.row_mut(k).copy_from_slice(&s.action);
        log_probs.push(s.log_prob);
    }
    Ok((actions, log_probs))
}

/// Next-state value for agent `i`.
///
/// Every agent's target actor maps its own next observation to a next action;
/// the joint next observations and next actions are concatenated and fed to
/// agent `i`'s target critic. For MASAC the result already includes the
/// entropy bonus `- alpha * log pi(a'_i | o'_i)`, with next-action noise drawn
/// from `rng`.
pub fn target_q_calculation<S: Scalar>(
    agents: &[AgentBundle<S>],
    layout: &JointLayout,
    batches: &[BatchArrays<S>],
    agent_i: usize,
    algorithm: Algorithm,
    entropy_alpha: f64,
    rng: &mut dyn RngCore,
) -> Result<Vec<S>> {
    let b = check_aligned(layout, batches)?;
    let mut next_actions = Vec::with_capacity(agents.len());
    let mut own_log_prob = None;
    for (j, agent) in agents.iter().enumerate() {
        let next_obs = Matrix::from_vec(b, layout.obs_dims[j], batches[j].obses_tp1.clone())?;
        let out = agent.target_actor.predict(&next_obs)?;
        let acts = match algorithm {
            Algorithm::Maddpg => {
                let mut a = out;
                a.as_mut_slice().iter_mut().for_each(|x| *x = x.tanh());
                a
            }
            Algorithm::Masac => {
                let noise = noise_matrix(rng, b, layout.act_dims[j]);
                let (a, lp) = squash_rows(&out, layout.act_dims[j], &noise)?;
                if j == agent_i {
                    own_log_prob = Some(lp);
                }
                a
            }
        };
        next_actions.push(acts);
    }
    let obs: Vec<&[S]> = batches.iter().map(|x| x.obses_tp1.as_slice()).collect();
    let acts: Vec<&[S]> = next_actions.iter().map(Matrix::as_slice).collect();
    let x = joint_input(layout, &obs, &acts, b)?;
    let mut q = agents[agent_i].target_critic.predict(&x)?.into_vec();
    if let Some(lp) = own_log_prob {
        let alpha = S::lit(entropy_alpha);
        for (qk, lpk) in q.iter_mut().zip(lp) {
            *qk -= alpha * lpk;
        }
    }
    Ok(q)
}

/// Replayed joint observation-action input for the centralized critic.
pub fn replay_joint_input<S: Scalar>(layout: &JointLayout, batches: &[BatchArrays<S>]) -> Result<Matrix<S>> {
    let b = check_aligned(layout, batches)?;
    let obs: Vec<&[S]> = batches.iter().map(|x| x.obses_t.as_slice()).collect();
    let acts: Vec<&[S]> = batches.iter().map(|x| x.actions.as_slice()).collect();
    joint_input(layout, &obs, &acts, b)
}

/// Mean squared error `(1/b) sum (Q(x_k) - y_k)^2` and its parameter gradient.
pub fn critic_loss_and_grads<S: Scalar>(critic: &MlpParams<S>, x: &Matrix<S>, y: &[S]) -> Result<(S, MlpGrads<S>)> {
    check_len("target length", x.rows(), y.len())?;
    let b = S::lit(x.rows() as f64);
    let (q, cache) = critic.forward_batch(x)?;
    let mut upstream = Matrix::zeros(x.rows(), 1);
    let mut loss = S::zero();
    for (k, &yk) in y.iter().enumerate() {
        let diff = q.get(k, 0) - yk;
        loss += diff * diff;
        upstream.set(k, 0, S::lit(2.0) * diff / b);
    }
    let (grads, _) = critic.backward(&cache, &upstream)?;
    Ok((loss / b, grads))
}

fn diverged(what: &'static str, agent: usize) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::NonFinite(_) => Error::Diverged { what, agent },
        other => other,
    }
}

/// One Adam step on the critic towards `y`; returns the loss before the step.
pub fn critic_update<S: Scalar>(
    agent: &mut AgentBundle<S>,
    agent_index: usize,
    layout: &JointLayout,
    batches: &[BatchArrays<S>],
    y: &[S],
) -> Result<S> {
    let x = replay_joint_input(layout, batches)?;
    let (loss, grads) = critic_loss_and_grads(&agent.critic, &x, y)?;
    if !loss.is_finite() {
        return Err(Error::Diverged { what: "q_loss", agent: agent_index });
    }
    agent
        .critic_opt
        .step(&mut agent.critic, &grads)
        .map_err(diverged("critic gradient", agent_index))?;
    Ok(loss)
}

/// Settings of the policy objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActorObjective {
    pub algorithm: Algorithm,
    /// MASAC entropy weight.
    pub entropy_alpha: f64,
    /// Weight of the `mean(u^2)` penalty on the pre-squash action `u`.
    pub policy_reg: f64,
}

impl ActorObjective {
    pub fn from_config(config: &TrainerConfig) -> Self {
        Self {
            algorithm: config.algorithm,
            entropy_alpha: config.entropy_alpha,
            policy_reg: config.policy_reg,
        }
    }
}

/// Policy objective for agent `i` and its gradient with respect to the actor.
///
/// Other agents' actions come from the replayed batch; only agent `i`'s slot
/// is replaced by its current policy output, so the gradient flows through
/// that slot alone. MADDPG minimizes `-Q`; MASAC minimizes
/// `alpha * log pi - Q` with a reparameterized sample driven by `noise`
/// (`b x act_dim` standard normals). Both add `policy_reg * mean(u^2)` over
/// the pre-squash actions `u` (the MASAC mean head).
pub fn actor_loss_and_grads<S: Scalar>(
    actor: &MlpParams<S>,
    critic: &MlpParams<S>,
    layout: &JointLayout,
    batches: &[BatchArrays<S>],
    agent_i: usize,
    objective: &ActorObjective,
    noise: Option<&Matrix<S>>,
) -> Result<(S, MlpGrads<S>)> {
    let ActorObjective { algorithm, entropy_alpha, policy_reg } = *objective;
    let b = check_aligned(layout, batches)?;
    let act_dim = layout.act_dims[agent_i];
    let bs = S::lit(b as f64);
    let obs_i = Matrix::from_vec(b, layout.obs_dims[agent_i], batches[agent_i].obses_t.clone())?;
    let (out, actor_cache) = actor.forward_batch(&obs_i)?;

    let (policy_actions, log_probs) = match algorithm {
        Algorithm::Maddpg => {
            let mut a = out.clone();
            a.as_mut_slice().iter_mut().for_each(|x| *x = x.tanh());
            (a, None)
        }
        Algorithm::Masac => {
            let noise = noise.ok_or_else(|| Error::Parameter("masac actor loss needs noise".into()))?;
            let (a, lp) = squash_rows(&out, act_dim, noise)?;
            (a, Some(lp))
        }
    };

    let obs: Vec<&[S]> = batches.iter().map(|x| x.obses_t.as_slice()).collect();
    let acts: Vec<&[S]> = batches
        .iter()
        .enumerate()
        .map(|(j, x)| if j == agent_i { policy_actions.as_slice() } else { x.actions.as_slice() })
        .collect();
    let x = joint_input(layout, &obs, &acts, b)?;
    let (q, critic_cache) = critic.forward_batch(&x)?;

    let alpha = S::lit(entropy_alpha);
    let mut loss = -q.as_slice().iter().copied().sum::<S>() / bs;
    if let Some(lp) = &log_probs {
        loss += alpha * lp.iter().copied().sum::<S>() / bs;
    }
    let reg = S::lit(policy_reg);
    let reg_count = bs * S::lit(act_dim as f64);
    if policy_reg > 0.0 {
        let sq: S = (0..b).flat_map(|k| out.row(k)[..act_dim].iter().map(|&u| u * u)).sum();
        loss += reg * sq / reg_count;
    }

    let upstream_q = Matrix::from_vec(b, 1, vec![-S::one() / bs; b])?;
    let dx = critic.input_gradient(&critic_cache, &upstream_q)?;
    let d_action = dx.columns(layout.act_offset(agent_i), act_dim);

    let mut upstream_actor = match algorithm {
        Algorithm::Maddpg => {
            let mut g = d_action;
            for (gv, &a) in g.as_mut_slice().iter_mut().zip(policy_actions.as_slice()) {
                *gv *= S::one() - a * a;
            }
            g
        }
        Algorithm::Masac => {
            let noise = noise.expect("checked above");
            let mut g = Matrix::zeros(b, 2 * act_dim);
            let d_lp = alpha / bs;
            for k in 0..b {
                let (mean, log_std) = out.row(k).split_at(act_dim);
                let sg = squashed_gaussian_backward(mean, log_std, noise.row(k), d_action.row(k), d_lp)?;
                let row = g.row_mut(k);
                row[..act_dim].copy_from_slice(&sg.d_mean);
                row[act_dim..].copy_from_slice(&sg.d_log_std);
            }
            g
        }
    };
    if policy_reg > 0.0 {
        let scale = S::lit(2.0) * reg / reg_count;
        for k in 0..b {
            let u = &out.row(k)[..act_dim];
            for (gv, &uv) in upstream_actor.row_mut(k)[..act_dim].iter_mut().zip(u) {
                *gv += scale * uv;
            }
        }
    }
    let (grads, _) = actor.backward(&actor_cache, &upstream_actor)?;
    Ok((loss, grads))
}

/// One Adam step on agent `i`'s actor; returns the loss before the step.
pub fn actor_update<S: Scalar>(
    agent: &mut AgentBundle<S>,
    agent_index: usize,
    layout: &JointLayout,
    batches: &[BatchArrays<S>],
    objective: &ActorObjective,
    rng: &mut dyn RngCore,
) -> Result<S> {
    let noise = match objective.algorithm {
        Algorithm::Maddpg => None,
        Algorithm::Masac => Some(noise_matrix(rng, batches[agent_index].len(), layout.act_dims[agent_index])),
    };
    let (loss, grads) = actor_loss_and_grads(
        &agent.actor,
        &agent.critic,
        layout,
        batches,
        agent_index,
        objective,
        noise.as_ref(),
    )?;
    if !loss.is_finite() {
        return Err(Error::Diverged { what: "p_loss", agent: agent_index });
    }
    agent
        .actor_opt
        .step(&mut agent.actor, &grads)
        .map_err(diverged("actor gradient", agent_index))?;
    Ok(loss)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateCounters {
    /// Times an update round was due.
    pub rounds: u64,
    /// Rounds that changed parameters.
    pub applied: u64,
    /// Rounds skipped because the buffers were too short.
    pub skipped: u64,
    /// Draws where the neighbor sampler fell back to uniform indices.
    pub sampler_fallbacks: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentLosses<S> {
    pub q_loss: S,
    pub p_loss: S,
}

/// One update round: for each agent in index order, sample a joint batch,
/// compute targets, step the critic, step the actor; then soft-update every
/// target network.
///
/// Returns `None` (and counts a skip) while the buffers are shorter than
/// [`TrainerConfig::min_buffer_len`].
#[allow(clippy::too_many_arguments)]
pub fn update_all_trainers<S: Scalar>(
    agents: &mut [AgentBundle<S>],
    layout: &JointLayout,
    config: &TrainerConfig,
    sampler: &dyn IndexSampler,
    rng: &mut dyn RngCore,
    profiler: &Profiler,
    counters: &mut UpdateCounters,
) -> Result<Option<Vec<AgentLosses<S>>>> {
    counters.rounds += 1;
    let len = agents.first().map_or(0, |a| a.buffer.len());
    if agents.is_empty() || len < config.min_buffer_len() {
        counters.skipped += 1;
        return Ok(None);
    }
    let _round = profiler.scope(PhaseId::UpdateAllTrainers);
    let gamma = S::lit(config.gamma);
    let objective = ActorObjective::from_config(config);
    let mut seq = 0u64;
    let mut losses = Vec::with_capacity(agents.len());
    for i in 0..agents.len() {
        let batches = {
            let _s = profiler.scope(PhaseId::MiniBatchSampling);
            let draw = sampler.draw(rng, len, config.batch_size)?;
            if draw.fell_back {
                counters.sampler_fallbacks += 1;
            }
            let buffers: Vec<_> = agents.iter().map(|a| &a.buffer).collect();
            collect_joint(&buffers, &draw.indices)?
        };
        let y = {
            let _s = profiler.scope(PhaseId::TargetQCalc);
            let q_next = target_q_calculation(agents, layout, &batches, i, config.algorithm, config.entropy_alpha, rng)?;
            target_y(&batches[i].rewards, &batches[i].dones, &q_next, gamma)?
        };
        let q_loss = {
            let _s = profiler.scope(PhaseId::QLoss);
            critic_update(&mut agents[i], i, layout, &batches, &y)?
        };
        seq += 1;
        agents[i].last_steps.critic = seq;
        let p_loss = {
            let _s = profiler.scope(PhaseId::PLoss);
            actor_update(&mut agents[i], i, layout, &batches, &objective, rng)?
        };
        seq += 1;
        agents[i].last_steps.actor = seq;
        losses.push(AgentLosses { q_loss, p_loss });
    }
    let tau = S::lit(config.tau);
    for agent in agents.iter_mut() {
        soft_update(&mut agent.target_actor, &agent.actor, tau)?;
        soft_update(&mut agent.target_critic, &agent.critic, tau)?;
        agent.soft_updates += 1;
        seq += 1;
        agent.last_steps.soft_update = seq;
    }
    counters.applied += 1;
    Ok(Some(losses))
}
