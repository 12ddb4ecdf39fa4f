//! Two-dimensional particle world with the cooperative-navigation and
//! predator-prey scenarios.
//!
//! Entities are stored learners first, then prey, then landmarks. Learners
//! apply continuous forces in `[-1, 1]^2`; prey are driven by
//! [`prey_policy`]; landmarks never move.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Observation<S> = Vec<S>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "coop-nav")]
    CoopNav,
    #[serde(rename = "predator-prey")]
    PredatorPrey,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::CoopNav => "coop-nav",
            Scenario::PredatorPrey => "predator-prey",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coop-nav" => Ok(Scenario::CoopNav),
            "predator-prey" => Ok(Scenario::PredatorPrey),
            other => Err(Error::Config(format!(
                "unknown scenario {other:?} (expected coop-nav or predator-prey)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub scenario: Scenario,
    pub n_learners: usize,
    pub n_prey: usize,
    pub n_landmarks: usize,
    pub dt: f64,
    pub damping: f64,
    pub max_speed: f64,
    pub max_episode_length: usize,
    pub world_halfwidth: f64,
    pub agent_radius: f64,
    pub landmark_radius: f64,
    pub collision_penalty: f64,
    pub tag_reward: f64,
    pub distance_shaping: f64,
    pub seed: u64,
}

impl EnvConfig {
    /// `n` agents and `n` landmarks.
    pub fn coop_nav(n: usize) -> Self {
        Self {
            scenario: Scenario::CoopNav,
            n_learners: n,
            n_prey: 0,
            n_landmarks: n,
            ..Self::base()
        }
    }

    /// `n` predators chasing `m` prey, no landmarks.
    pub fn predator_prey(n: usize, m: usize) -> Self {
        Self {
            scenario: Scenario::PredatorPrey,
            n_learners: n,
            n_prey: m,
            n_landmarks: 0,
            ..Self::base()
        }
    }

    pub fn for_scenario(scenario: Scenario, n: usize) -> Self {
        match scenario {
            Scenario::CoopNav => Self::coop_nav(n),
            Scenario::PredatorPrey => Self::predator_prey(n, 1),
        }
    }

    fn base() -> Self {
        Self {
            scenario: Scenario::CoopNav,
            n_learners: 3,
            n_prey: 0,
            n_landmarks: 3,
            dt: 0.2,
            damping: 0.25,
            max_speed: 1.0,
            max_episode_length: 25,
            world_halfwidth: 1.0,
            agent_radius: 0.05,
            landmark_radius: 0.05,
            collision_penalty: 1.0,
            tag_reward: 10.0,
            distance_shaping: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_learners < 1 {
            return fail("n_learners must be at least 1".into());
        }
        if self.max_episode_length < 1 {
            return fail("max_episode_length must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return fail(format!("damping must lie in [0, 1), got {}", self.damping));
        }
        if !(self.max_speed > 0.0) || !(self.world_halfwidth > 0.0) {
            return fail("max_speed and world_halfwidth must be positive".into());
        }
        if self.agent_radius < 0.0 || self.landmark_radius < 0.0 {
            return fail("radii must be non-negative".into());
        }
        if self.scenario == Scenario::CoopNav && self.n_prey != 0 {
            return fail("coop-nav has no prey".into());
        }
        Ok(())
    }

    pub fn n_movable(&self) -> usize {
        self.n_learners + self.n_prey
    }

    pub fn n_entities(&self) -> usize {
        self.n_movable() + self.n_landmarks
    }

    /// `2 (vel) + 2 (pos) + 2L + 2(N + M - 1)`.
    pub fn obs_dim(&self) -> usize {
        4 + 2 * self.n_landmarks + 2 * (self.n_movable() - 1)
    }

    pub const ACTION_DIM: usize = 2;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntityKind {
    Learner,
    Prey,
    Landmark,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Learner => "learner",
            EntityKind::Prey => "prey",
            EntityKind::Landmark => "landmark",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entity<S> {
    pub pos: [S; 2],
    pub vel: [S; 2],
    pub radius: S,
    pub kind: EntityKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState<S> {
    pub entities: Vec<Entity<S>>,
    pub step_count: usize,
    /// Learner action components that arrived outside `[-1, 1]` and were clamped.
    pub clamped_actions: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<S> {
    pub observations: Vec<Observation<S>>,
    pub rewards: Vec<S>,
    pub done: bool,
}

fn dist<S: Scalar>(a: &[S; 2], b: &[S; 2]) -> S {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

fn overlaps<S: Scalar>(a: &Entity<S>, b: &Entity<S>) -> bool {
    dist(&a.pos, &b.pos) < a.radius + b.radius
}

impl<S: Scalar> WorldState<S> {
    pub fn learners(&self) -> impl Iterator<Item = (usize, &Entity<S>)> {
        self.of_kind(EntityKind::Learner)
    }

    pub fn prey(&self) -> impl Iterator<Item = (usize, &Entity<S>)> {
        self.of_kind(EntityKind::Prey)
    }

    pub fn landmarks(&self) -> impl Iterator<Item = (usize, &Entity<S>)> {
        self.of_kind(EntityKind::Landmark)
    }

    fn of_kind(&self, kind: EntityKind) -> impl Iterator<Item = (usize, &Entity<S>)> {
        self.entities
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.kind == kind)
    }

    pub fn observation(&self, agent: usize) -> Observation<S> {
        let me = &self.entities[agent];
        let mut obs = Vec::with_capacity(4 + 2 * self.entities.len());
        obs.extend_from_slice(&me.vel);
        obs.extend_from_slice(&me.pos);
        for (_, l) in self.landmarks() {
            obs.push(l.pos[0] - me.pos[0]);
            obs.push(l.pos[1] - me.pos[1]);
        }
        for (j, e) in self.entities.iter().enumerate() {
            if j != agent && e.kind != EntityKind::Landmark {
                obs.push(e.pos[0] - me.pos[0]);
                obs.push(e.pos[1] - me.pos[1]);
            }
        }
        obs
    }

    pub fn observations(&self) -> Vec<Observation<S>> {
        self.learners().map(|(i, _)| self.observation(i)).collect()
    }
}

/// Uniform placement of every entity, zero velocities.
pub fn reset<S: Scalar, R: Rng + ?Sized>(
    config: &EnvConfig,
    rng: &mut R,
) -> Result<(WorldState<S>, Vec<Observation<S>>)> {
    config.validate()?;
    let hw = config.world_halfwidth;
    let place = Uniform::new_inclusive(-hw, hw).expect("positive halfwidth");
    let kinds = std::iter::repeat_n(EntityKind::Learner, config.n_learners)
        .chain(std::iter::repeat_n(EntityKind::Prey, config.n_prey))
        .chain(std::iter::repeat_n(EntityKind::Landmark, config.n_landmarks));
    let entities = kinds
        .map(|kind| {
            let radius = match kind {
                EntityKind::Landmark => config.landmark_radius,
                _ => config.agent_radius,
            };
            Entity {
                pos: [S::lit(place.sample(rng)), S::lit(place.sample(rng))],
                vel: [S::zero(); 2],
                radius: S::lit(radius),
                kind,
            }
        })
        .collect();
    let state = WorldState {
        entities,
        step_count: 0,
        clamped_actions: 0,
    };
    let obs = state.observations();
    Ok((state, obs))
}

/// Unit vector away from the nearest learner; ties go to the lowest index.
pub fn prey_policy<S: Scalar>(state: &WorldState<S>, prey_index: usize) -> Result<[S; 2]> {
    let prey = state
        .entities
        .get(prey_index)
        .ok_or(Error::Index {
            index: prey_index,
            len: state.entities.len(),
        })?;
    if prey.kind != EntityKind::Prey {
        return Err(Error::Kind(prey_index));
    }
    let mut nearest: Option<(S, &Entity<S>)> = None;
    for (_, p) in state.learners() {
        let d = dist(&prey.pos, &p.pos);
        if nearest.is_none_or(|(best, _)| d < best) {
            nearest = Some((d, p));
        }
    }
    let Some((d, threat)) = nearest else {
        return Ok([S::zero(); 2]);
    };
    if d <= S::zero() {
        return Ok([S::zero(); 2]);
    }
    Ok([
        (prey.pos[0] - threat.pos[0]) / d,
        (prey.pos[1] - threat.pos[1]) / d,
    ])
}

/// Per-learner rewards for the current (post-integration) state.
pub fn compute_rewards<S: Scalar>(state: &WorldState<S>, config: &EnvConfig) -> Vec<S> {
    let learners: Vec<&Entity<S>> = state.learners().map(|(_, e)| e).collect();
    match config.scenario {
        Scenario::CoopNav => {
            let coverage: S = state
                .landmarks()
                .map(|(_, l)| {
                    learners
                        .iter()
                        .map(|a| dist(&a.pos, &l.pos))
                        .fold(S::infinity(), S::min)
                })
                .filter(|d| d.is_finite())
                .sum();
            // every overlapping pair counts once for each of its two members
            let mut overlap_count = 0usize;
            for (i, a) in learners.iter().enumerate() {
                for b in &learners[i + 1..] {
                    if overlaps(a, b) {
                        overlap_count += 2;
                    }
                }
            }
            let shared = -coverage - S::lit(config.collision_penalty) * S::lit(overlap_count as f64);
            vec![shared; learners.len()]
        }
        Scenario::PredatorPrey => {
            let prey: Vec<&Entity<S>> = state.prey().map(|(_, e)| e).collect();
            learners
                .iter()
                .map(|a| {
                    let tags = prey.iter().filter(|p| overlaps(a, p)).count();
                    let nearest = prey
                        .iter()
                        .map(|p| dist(&a.pos, &p.pos))
                        .fold(S::infinity(), S::min);
                    let shaping = if nearest.is_finite() {
                        S::lit(config.distance_shaping) * nearest
                    } else {
                        S::zero()
                    };
                    S::lit(config.tag_reward) * S::lit(tags as f64) - shaping
                })
                .collect()
        }
    }
}

/// Advances the world by one semi-implicit Euler step.
pub fn step<S: Scalar>(
    state: &mut WorldState<S>,
    joint_actions: &[Vec<S>],
    config: &EnvConfig,
) -> Result<StepOutcome<S>> {
    if joint_actions.len() != config.n_learners {
        return Err(Error::Shape {
            context: "joint action count",
            expected: config.n_learners,
            got: joint_actions.len(),
        });
    }
    if state.step_count >= config.max_episode_length {
        return Err(Error::EpisodeDone(state.step_count));
    }
    let mut forces = Vec::with_capacity(config.n_movable());
    for a in joint_actions {
        if a.len() != EnvConfig::ACTION_DIM {
            return Err(Error::Shape {
                context: "action width",
                expected: EnvConfig::ACTION_DIM,
                got: a.len(),
            });
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("environment action".into()));
        }
        let mut f = [a[0], a[1]];
        for x in f.iter_mut() {
            if x.abs() > S::one() {
                state.clamped_actions += 1;
                log::debug!("clamping out-of-range action component {x}");
                *x = x.max(-S::one()).min(S::one());
            }
        }
        forces.push(f);
    }
    for (i, _) in state.prey() {
        forces.push(prey_policy(state, i)?);
    }

    let dt = S::lit(config.dt);
    let keep = S::one() - S::lit(config.damping);
    let max_speed = S::lit(config.max_speed);
    for (e, f) in state.entities.iter_mut().zip(&forces) {
        debug_assert_ne!(e.kind, EntityKind::Landmark);
        let mut v = [keep * e.vel[0] + f[0] * dt, keep * e.vel[1] + f[1] * dt];
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if speed > max_speed {
            let scale = max_speed / speed;
            v = [v[0] * scale, v[1] * scale];
        }
        e.vel = v;
        e.pos = [e.pos[0] + v[0] * dt, e.pos[1] + v[1] * dt];
    }
    state.step_count += 1;

    Ok(StepOutcome {
        observations: state.observations(),
        rewards: compute_rewards(state, config),
        done: state.step_count >= config.max_episode_length,
    })
}

/// Writes the trajectory CSV header: `step,entity_id,kind,x,y,vx,vy,reward`.
pub fn write_trajectory_header<W: Write>(out: &mut W) -> std::io::Result<()> {
    writeln!(out, "step,entity_id,kind,x,y,vx,vy,reward")
}

/// One row per entity; non-learners carry a zero reward.
pub fn write_trajectory_rows<S: Scalar, W: Write>(
    out: &mut W,
    state: &WorldState<S>,
    rewards: &[S],
) -> std::io::Result<()> {
    let mut learner = 0;
    for (id, e) in state.entities.iter().enumerate() {
        let reward = if e.kind == EntityKind::Learner {
            learner += 1;
            rewards.get(learner - 1).copied().unwrap_or_else(S::zero)
        } else {
            S::zero()
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            state.step_count,
            id,
            e.kind.as_str(),
            e.pos[0],
            e.pos[1],
            e.vel[0],
            e.vel[1],
            reward
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
