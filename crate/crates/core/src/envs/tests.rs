use super::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn entity(kind: EntityKind, x: f64, y: f64) -> Entity<f64> {
    Entity {
        pos: [x, y],
        vel: [0.0; 2],
        radius: 0.05,
        kind,
    }
}

fn world(entities: Vec<Entity<f64>>) -> WorldState<f64> {
    WorldState {
        entities,
        step_count: 0,
        clamped_actions: 0,
    }
}

#[test]
fn observation_lengths() {
    // 2 + 2 + 2*3 + 2*(3 - 1)
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, obs) = reset::<f64, _>(&EnvConfig::coop_nav(3), &mut rng).unwrap();
    assert_eq!(obs.len(), 3);
    assert!(obs.iter().all(|o| o.len() == 14));
    // 2 + 2 + 0 + 2*(3 + 1 - 1)
    let (_, obs) = reset::<f64, _>(&EnvConfig::predator_prey(3, 1), &mut rng).unwrap();
    assert!(obs.iter().all(|o| o.len() == 10));
    assert_eq!(EnvConfig::predator_prey(3, 1).obs_dim(), 10);
}

#[test]
fn reset_is_seeded() {
    let cfg = EnvConfig::predator_prey(4, 2);
    let a = reset::<f64, _>(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let b = reset::<f64, _>(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(a, b);
    let (state, _) = a;
    assert!(state.entities.iter().all(|e| e.vel == [0.0, 0.0]
        && e.pos.iter().all(|p| p.abs() <= cfg.world_halfwidth)));
}

#[test]
fn zero_actions_do_not_move() {
    let cfg = EnvConfig::coop_nav(3);
    let (mut state, _) = reset::<f64, _>(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let before = state.entities.clone();
    let out = step(&mut state, &vec![vec![0.0, 0.0]; 3], &cfg).unwrap();
    assert!(!out.done);
    assert_eq!(state.step_count, 1);
    for (a, b) in before.iter().zip(&state.entities) {
        assert_eq!(a.pos, b.pos);
    }
}

#[test]
fn episode_ends_at_step_limit() {
    let cfg = EnvConfig::coop_nav(2);
    let (mut state, _) = reset::<f64, _>(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for t in 1..=25 {
        let out = step(&mut state, &vec![vec![0.3, -0.2]; 2], &cfg).unwrap();
        assert_eq!(out.done, t == 25, "step {t}");
    }
    let err = step(&mut state, &vec![vec![0.0, 0.0]; 2], &cfg).unwrap_err();
    assert_eq!(err, Error::EpisodeDone(25));
}

#[test]
fn euler_update_from_rest() {
    let cfg = EnvConfig { dt: 0.1, damping: 0.25, ..EnvConfig::coop_nav(1) };
    let mut state = world(vec![
        entity(EntityKind::Learner, 0.2, 0.3),
        entity(EntityKind::Landmark, 0.9, 0.9),
    ]);
    step(&mut state, &[vec![1.0, 0.0]], &cfg).unwrap();
    let e = &state.entities[0];
    assert!((e.vel[0] - 0.1).abs() < 1e-15 && e.vel[1] == 0.0);
    assert!((e.pos[0] - 0.21).abs() < 1e-15 && e.pos[1] == 0.3);
}

#[test]
fn step_rejects_wrong_action_count_and_clamps_range() {
    let cfg = EnvConfig::coop_nav(2);
    let (mut state, _) = reset::<f64, _>(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert!(matches!(
        step(&mut state, &[vec![0.0, 0.0]], &cfg),
        Err(Error::Shape { .. })
    ));
    let mut clamped = state.clone();
    step(&mut clamped, &[vec![5.0, 0.0], vec![0.0, -3.0]], &cfg).unwrap();
    assert_eq!(clamped.clamped_actions, 2);
    let mut reference = state.clone();
    step(&mut reference, &[vec![1.0, 0.0], vec![0.0, -1.0]], &cfg).unwrap();
    assert_eq!(clamped.entities, reference.entities);
}

#[test]
fn prey_flees_west_predator() {
    let state = world(vec![
        entity(EntityKind::Learner, -1.0, 0.0),
        entity(EntityKind::Prey, 0.0, 0.0),
    ]);
    assert_eq!(prey_policy(&state, 1).unwrap(), [1.0, 0.0]);
}

#[test]
fn prey_tie_break_lowest_index() {
    // Exhaustive scan: both predators at distance 1, index 0 wins.
    let state = world(vec![
        entity(EntityKind::Learner, 1.0, 0.0),
        entity(EntityKind::Learner, -1.0, 0.0),
        entity(EntityKind::Prey, 0.0, 0.0),
    ]);
    assert_eq!(prey_policy(&state, 2).unwrap(), [-1.0, 0.0]);
}

#[test]
fn prey_without_predators_stays() {
    let state = world(vec![entity(EntityKind::Prey, 0.5, 0.5)]);
    assert_eq!(prey_policy(&state, 0).unwrap(), [0.0, 0.0]);
}

#[test]
fn prey_policy_rejects_non_prey() {
    let state = world(vec![
        entity(EntityKind::Learner, 0.0, 0.0),
        entity(EntityKind::Prey, 1.0, 0.0),
    ]);
    assert_eq!(prey_policy(&state, 0), Err(Error::Kind(0)));
    assert!(matches!(prey_policy(&state, 7), Err(Error::Index { .. })));
}

#[test]
fn coop_reward_on_landmark_is_zero() {
    let cfg = EnvConfig::coop_nav(1);
    let state = world(vec![
        entity(EntityKind::Learner, 0.4, -0.2),
        entity(EntityKind::Landmark, 0.4, -0.2),
    ]);
    assert_eq!(compute_rewards(&state, &cfg), vec![0.0]);
}

#[test]
fn coop_reward_two_agents_same_distance() {
    let cfg = EnvConfig {
        n_landmarks: 1,
        ..EnvConfig::coop_nav(2)
    };
    let d = 0.5;
    let state = world(vec![
        entity(EntityKind::Learner, d, 0.0),
        entity(EntityKind::Learner, -d, 0.0),
        entity(EntityKind::Landmark, 0.0, 0.0),
    ]);
    assert_eq!(compute_rewards(&state, &cfg), vec![-d, -d]);
}

#[test]
fn coop_collision_penalty() {
    let cfg = EnvConfig {
        n_landmarks: 1,
        ..EnvConfig::coop_nav(2)
    };
    let state = world(vec![
        entity(EntityKind::Learner, 0.0, 0.0),
        entity(EntityKind::Learner, 0.05, 0.0),
        entity(EntityKind::Landmark, 0.0, 0.0),
    ]);
    assert_eq!(compute_rewards(&state, &cfg), vec![-2.0, -2.0]);
}

#[test]
fn predator_on_prey_gets_tag_reward() {
    let cfg = EnvConfig::predator_prey(2, 1);
    let state = world(vec![
        entity(EntityKind::Learner, 0.3, 0.3),
        entity(EntityKind::Learner, 0.3, 1.3),
        entity(EntityKind::Prey, 0.3, 0.3),
    ]);
    let r = compute_rewards(&state, &cfg);
    assert_eq!(r[0], 10.0);
    assert!((r[1] + 0.1).abs() < 1e-12);
}

#[test]
fn config_validation() {
    assert!(EnvConfig::coop_nav(0).validate().is_err());
    assert!(EnvConfig { damping: 1.0, ..EnvConfig::coop_nav(2) }.validate().is_err());
    assert!(EnvConfig { dt: 0.0, ..EnvConfig::coop_nav(2) }.validate().is_err());
    assert!(EnvConfig { max_episode_length: 0, ..EnvConfig::coop_nav(2) }.validate().is_err());
    assert_eq!("predator-prey".parse::<Scenario>().unwrap(), Scenario::PredatorPrey);
    assert!("simple-tag".parse::<Scenario>().is_err());
}

#[test]
fn trajectory_csv_rows() {
    let state = world(vec![
        entity(EntityKind::Learner, 0.5, 0.0),
        entity(EntityKind::Landmark, 0.0, 0.0),
    ]);
    let mut out = Vec::new();
    write_trajectory_header(&mut out).unwrap();
    write_trajectory_rows(&mut out, &state, &[-0.5]).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,entity_id,kind,x,y,vx,vy,reward");
    assert_eq!(lines[1], "0,0,learner,0.5,0,0,0,-0.5");
    assert_eq!(lines[2], "0,1,landmark,0,0,0,0,0");
}
