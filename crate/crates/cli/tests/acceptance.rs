//! End-to-end acceptance criteria. Each test prints one PASS/FAIL line and
//! holds a global lock so timing-sensitive criteria never overlap.

use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use marl_bench::bench::{run_sampler_bench, BenchConfig};
use marl_bench::compare::{compare_dirs, regressions, render};
use marl_bench::spec::{Cell, ExperimentSpec};
use marl_bench::train::{cmd_train, run_cell, STATS_FILE};
use marl_core::envs::{self, EnvConfig, Scenario};
use marl_core::nn::{soft_update, Matrix, MlpGrads, MlpParams};
use marl_core::profiler::{breakdown, PhaseId};
use marl_core::replay::{collect_joint, neighbor_batch, neighbor_sequence, ReplayBuffer, SampleIndexSet, SamplerKind};
use marl_core::trainers::{
    actor_loss_and_grads, critic_loss_and_grads, replay_joint_input, run_training, ActorObjective, AgentBundle,
    Algorithm, JointLayout, TrainerConfig,
};
use marl_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|p| p.into_inner())
}

fn verdict(id: u32, name: &str, pass: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let within = elapsed <= budget;
    let ok = pass && within;
    println!(
        "criterion {id} [{name}]: {} ({detail}; {:.1} s of {:.0} s budget)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(within, "criterion {id} exceeded its {budget:?} budget ({elapsed:?})");
}

#[test]
fn criterion_1_sampler_speedup() {
    let _g = serial();
    let started = Instant::now();
    let cfg = BenchConfig { trials: 30, ..BenchConfig::default() };
    assert_eq!((cfg.buffer_len, cfg.batch, cfg.neighbors, cfg.obs_dim), (1_000_000, 1024, 3, 20));
    let r = run_sampler_bench(&cfg).unwrap();
    let detail = format!(
        "neighbor/uniform median ratio {:.3} (limit 0.85), reduction {:.2}%, uniform {:.1} us, neighbor {:.1} us",
        r.ratio,
        r.reduction_pct,
        r.uniform.median_ns * 1e-3,
        r.neighbor.median_ns * 1e-3
    );
    verdict(1, "sampler speedup", r.ratio <= 0.85, started.elapsed(), Duration::from_secs(120), &detail);
}

/// Literal transcription of the neighbor sampling loop over stored records.
fn algorithm_one(indices: &[usize], storage: &[usize], n: usize, b: usize) -> Vec<usize> {
    let d = storage.len();
    let mut obses_t = Vec::new();
    for &i in indices {
        let mut alpha = Vec::new();
        let lo = if i >= n { i - n } else { 0 };
        let hi = if i + n + 1 < d { i + n + 1 } else { d };
        for j in lo..hi {
            if j != i {
                alpha.push(j);
            }
        }
        if alpha.iter().all(|&k| k < d) {
            for k in alpha {
                obses_t.push(storage[k]);
            }
        }
        if obses_t.len() >= b {
            break;
        }
    }
    obses_t
}

#[test]
fn criterion_2_algorithm_one_equivalence() {
    let _g = serial();
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let ns = [1usize, 2, 3, 5];
    let mut mismatches = 0;
    for _ in 0..1000 {
        let len = rng.random_range(1..=200);
        let n = ns[rng.random_range(0..ns.len())];
        let b: usize = rng.random_range(1..=64);
        let anchors: Vec<usize> = (0..rng.random_range(1..=b.div_ceil(2 * n) + 8))
            .map(|_| rng.random_range(0..len))
            .collect();
        let storage: Vec<usize> = (0..len).collect();
        let expected = algorithm_one(&anchors, &storage, n, b);
        if neighbor_sequence(&anchors, len, n, b).unwrap() != expected {
            mismatches += 1;
            continue;
        }
        // The gathered batch holds the first b records of that sequence.
        let mut buf = ReplayBuffer::<f64>::new(len).unwrap();
        for k in 0..len {
            buf.push(&[k as f64], &[0.0], 0.0, &[k as f64], false).unwrap();
        }
        let set = SampleIndexSet { indices: anchors };
        match neighbor_batch(&set, &buf, n, b) {
            Ok(batch) => {
                let got: Vec<usize> = batch.obses_t.iter().map(|&x| x as usize).collect();
                if got != expected[..b] {
                    mismatches += 1;
                }
            }
            Err(Error::InsufficientData { gathered, .. }) if expected.len() < b && gathered == expected.len() => {}
            Err(_) => mismatches += 1,
        }
    }
    verdict(
        2,
        "algorithm 1 oracle",
        mismatches == 0,
        started.elapsed(),
        Duration::from_secs(10),
        &format!("{mismatches} mismatches over 1000 cases"),
    );
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Largest relative error between `grads` and central differences of `loss`.
fn fd_worst(params: &MlpParams<f64>, grads: &MlpGrads<f64>, loss: impl Fn(&MlpParams<f64>) -> f64) -> f64 {
    const EPS: f64 = 1e-5;
    let analytic: Vec<f64> = grads.tensors().flat_map(|t| t.to_vec()).collect();
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let mut k = 0;
    for ti in 0..probe.tensors().count() {
        let len = probe.tensors().nth(ti).unwrap().len();
        for i in 0..len {
            let orig = probe.tensors().nth(ti).unwrap()[i];
            probe.tensors_mut().nth(ti).unwrap()[i] = orig + EPS;
            let plus = loss(&probe);
            probe.tensors_mut().nth(ti).unwrap()[i] = orig - EPS;
            let minus = loss(&probe);
            probe.tensors_mut().nth(ti).unwrap()[i] = orig;
            worst = worst.max(rel_err(analytic[k], (plus - minus) / (2.0 * EPS)));
            k += 1;
        }
    }
    worst
}

#[test]
fn criterion_3_gradient_suite() {
    let _g = serial();
    let started = Instant::now();
    let mut worst_critic = 0.0f64;
    let mut worst_actor = 0.0f64;
    for case in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + case);
        let n = rng.random_range(1..=3);
        let layout = JointLayout::uniform(n, rng.random_range(1..=4), rng.random_range(1..=2));
        let algorithm = if case % 2 == 0 { Algorithm::Maddpg } else { Algorithm::Masac };
        let config = TrainerConfig { algorithm, hidden: 8, batch_size: 4, buffer_capacity: 8, ..Default::default() };
        let agents: Vec<AgentBundle<f64>> =
            (0..n).map(|i| AgentBundle::new(i, &layout, &config, &mut rng).unwrap()).collect();
        let b = 4;
        let mut uni = |len: usize| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let batches: Vec<_> = (0..n)
            .map(|j| marl_core::replay::BatchArrays {
                obs_dim: layout.obs_dims[j],
                act_dim: layout.act_dims[j],
                obses_t: uni(b * layout.obs_dims[j]),
                actions: uni(b * layout.act_dims[j]),
                rewards: uni(b),
                obses_tp1: uni(b * layout.obs_dims[j]),
                dones: vec![false; b],
            })
            .collect();
        let i = case as usize % n;

        let x = replay_joint_input(&layout, &batches).unwrap();
        let y = uni(b);
        let (_, cg) = critic_loss_and_grads(&agents[i].critic, &x, &y).unwrap();
        worst_critic = worst_critic.max(fd_worst(&agents[i].critic, &cg, |p| critic_loss_and_grads(p, &x, &y).unwrap().0));

        let objective = ActorObjective { algorithm, entropy_alpha: 0.05, policy_reg: 1e-3 };
        let noise = (algorithm == Algorithm::Masac).then(|| {
            let d = layout.act_dims[i];
            Matrix::from_vec(b, d, (0..b * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
        });
        let loss = |p: &MlpParams<f64>| {
            actor_loss_and_grads(p, &agents[i].critic, &layout, &batches, i, &objective, noise.as_ref()).unwrap().0
        };
        let (_, ag) =
            actor_loss_and_grads(&agents[i].actor, &agents[i].critic, &layout, &batches, i, &objective, noise.as_ref())
                .unwrap();
        worst_actor = worst_actor.max(fd_worst(&agents[i].actor, &ag, loss));
    }
    verdict(
        3,
        "gradient suite",
        worst_critic < 1e-6 && worst_actor < 1e-6,
        started.elapsed(),
        Duration::from_secs(30),
        &format!("worst rel. err critic {worst_critic:.2e}, actor {worst_actor:.2e} over 100 instances (limit 1e-6)"),
    );
}

#[test]
fn criterion_4_update_phase_scaling() {
    let _g = serial();
    let started = Instant::now();
    let config = TrainerConfig { episodes: 500, algorithm: Algorithm::Maddpg, sampler: SamplerKind::Uniform, ..Default::default() };
    let mut share = Vec::new();
    let mut per_update_mbs = Vec::new();
    for n in [3usize, 6] {
        let env = EnvConfig::predator_prey(n, 1);
        let out = run_training::<f64>(&config, &env).unwrap();
        let r = &out.report;
        share.push(r.share_of_total(PhaseId::UpdateAllTrainers));
        per_update_mbs.push(r.ns(PhaseId::MiniBatchSampling) as f64 / r.count(PhaseId::UpdateAllTrainers) as f64);
        let rows = breakdown(r).unwrap();
        let sub: Vec<String> = rows
            .iter()
            .filter(|row| row.parent == PhaseId::UpdateAllTrainers.name())
            .map(|row| format!("{} {:.1}%", row.phase, row.pct_of_parent))
            .collect();
        println!("  N={n}: update share {:.1}% of total; within update: {}", share.last().unwrap(), sub.join(", "));
    }
    let growth = per_update_mbs[1] / per_update_mbs[0];
    verdict(
        4,
        "update-phase scaling",
        share[1] > share[0] && growth > 1.5,
        started.elapsed(),
        Duration::from_secs(600),
        &format!(
            "update share {:.1}% -> {:.1}%, per-update sampling time x{growth:.2} (limit > 1.5)",
            share[0],
            share[1]
        ),
    );
}

#[test]
fn criterion_5_reward_parity() {
    let _g = serial();
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut finals = Vec::new();
    let mut learned = true;
    for sampler in [SamplerKind::Uniform, SamplerKind::Neighbor] {
        let spec = ExperimentSpec {
            scenario: Scenario::CoopNav,
            agents: vec![3],
            seeds: vec![0, 1, 2],
            trainer: TrainerConfig { episodes: 2000, sampler, ..Default::default() },
            out: dir.path().join(sampler.to_string()),
            checkpoints: false,
            ..Default::default()
        };
        let mut sum = 0.0;
        for s in cmd_train(&spec).unwrap() {
            let rewards = marl_bench::compare::read_rewards(&s.dir.join(STATS_FILE)).unwrap();
            let first = rewards[..100].iter().sum::<f64>() / 100.0;
            println!("  {sampler} seed {}: first-100 {first:.2}, final-10% {:.2}", s.cell.seed, s.final_window_reward);
            learned &= s.final_window_reward > first;
            sum += s.final_window_reward;
        }
        finals.push(sum / 3.0);
    }
    let delta = (finals[1] - finals[0]).abs() / finals[0].abs();
    verdict(
        5,
        "reward parity",
        delta <= 0.10 && learned,
        started.elapsed(),
        Duration::from_secs(1200),
        &format!(
            "final-window mean uniform {:.2}, neighbor {:.2}, difference {:.1}% (limit 10%); every run improved on its first 100 episodes: {learned}",
            finals[0],
            finals[1],
            100.0 * delta
        ),
    );
}

#[test]
fn criterion_6_end_to_end_reduction() {
    let _g = serial();
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    for sampler in [SamplerKind::Uniform, SamplerKind::Neighbor] {
        let spec = ExperimentSpec {
            scenario: Scenario::CoopNav,
            agents: vec![3, 6, 12],
            seeds: vec![0],
            trainer: TrainerConfig { episodes: 200, sampler, ..Default::default() },
            out: dir.path().join(sampler.to_string()),
            checkpoints: false,
            ..Default::default()
        };
        cmd_train(&spec).unwrap();
    }
    let report = compare_dirs(&dir.path().join("uniform"), &dir.path().join("neighbor"), 10.0).unwrap();
    print!("{}", render(&report));
    let failures = regressions(&report, 2.0);
    let summary: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("N={} total {:+.2}% sampling {:+.2}%", r.n_agents, r.total_reduction_pct, r.sampling_reduction_pct))
        .collect();
    verdict(
        6,
        "end-to-end non-regression",
        failures.is_empty() && report.rows.len() == 3,
        started.elapsed(),
        Duration::from_secs(1200),
        &format!("reductions: {} (limit: no worse than -2%)", summary.join("; ")),
    );
}

fn stats_without_wall_time(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn criterion_7_property_suites() {
    let _g = serial();
    let started = Instant::now();
    let mut failures: Vec<&str> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Ring semantics: the newest `capacity` records survive, oldest overwritten first.
    for _ in 0..100 {
        let cap = rng.random_range(1..20);
        let pushes = rng.random_range(0..60);
        let mut buf = ReplayBuffer::<f64>::new(cap).unwrap();
        for k in 0..pushes {
            buf.push(&[k as f64], &[0.0], 0.0, &[0.0], false).unwrap();
        }
        let ok = buf.len() == pushes.min(cap)
            && (pushes.saturating_sub(cap)..pushes).all(|k| buf.get(k % cap).unwrap().obs[0] == k as f64);
        if !ok {
            failures.push("replay ring semantics");
            break;
        }
    }

    // Alignment: lockstep buffers give rows from one timestep; skewed ones are rejected.
    let mut bufs: Vec<ReplayBuffer<f64>> = (0..3).map(|_| ReplayBuffer::new(16).unwrap()).collect();
    for t in 0..40 {
        for (j, b) in bufs.iter_mut().enumerate() {
            b.push(&[t as f64, j as f64], &[0.0], t as f64, &[0.0, 0.0], false).unwrap();
        }
    }
    let set = SampleIndexSet { indices: (0..16).map(|_| rng.random_range(0..16)).collect() };
    let joint = collect_joint(&bufs, &set).unwrap();
    let aligned = (0..16).all(|k| joint.iter().all(|b| b.rewards[k] == joint[0].rewards[k]));
    bufs[2].push(&[0.0, 0.0], &[0.0], 0.0, &[0.0, 0.0], false).unwrap();
    if !aligned || !matches!(collect_joint(&bufs, &set), Err(Error::Alignment(_))) {
        failures.push("buffer alignment");
    }

    // Speed bound and cooperative reward symmetry under random actions.
    for (scenario, n) in [(Scenario::CoopNav, 3), (Scenario::PredatorPrey, 4)] {
        let cfg = EnvConfig::for_scenario(scenario, n);
        let (mut state, _) = envs::reset::<f64, _>(&cfg, &mut rng).unwrap();
        for _ in 0..cfg.max_episode_length {
            let actions: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
            let out = envs::step(&mut state, &actions, &cfg).unwrap();
            let fast = state.entities.iter().any(|e| e.vel[0].hypot(e.vel[1]) > cfg.max_speed + 1e-12);
            let asym = scenario == Scenario::CoopNav && out.rewards.iter().any(|&r| r != out.rewards[0]);
            if fast {
                failures.push("speed bound");
            }
            if asym {
                failures.push("reward symmetry");
            }
        }
    }

    // Soft-update convexity.
    for _ in 0..50 {
        let online = MlpParams::<f64>::init(3, 8, 2, &mut rng).unwrap();
        let mut target = MlpParams::<f64>::init(3, 8, 2, &mut rng).unwrap();
        let before = target.clone();
        soft_update(&mut target, &online, rng.random_range(0.0..=1.0)).unwrap();
        let convex = target
            .tensors()
            .zip(before.tensors().zip(online.tensors()))
            .all(|(t, (b, o))| t.iter().zip(b.iter().zip(o)).all(|(&t, (&b, &o))| t >= b.min(o) && t <= b.max(o)));
        if !convex {
            failures.push("soft-update convexity");
            break;
        }
    }

    // Seeded determinism through the artifact writer, plus profiler closure on the result.
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let spec = ExperimentSpec {
            agents: vec![3],
            trainer: TrainerConfig { episodes: 30, batch_size: 256, update_every: 50, ..Default::default() },
            out: dir.path().join(sub),
            checkpoints: false,
            ..Default::default()
        };
        run_cell(&spec, Cell { n_agents: 3, seed: 11 }).unwrap().dir
    };
    let (a, b) = (run("a"), run("b"));
    if stats_without_wall_time(&a.join(STATS_FILE)) != stats_without_wall_time(&b.join(STATS_FILE)) {
        failures.push("seeded determinism");
    }
    let profile = marl_bench::compare::read_profile(&a.join(marl_bench::train::PROFILE_JSON)).unwrap();
    let rows = breakdown(&profile).unwrap();
    for parent in ["total", PhaseId::UpdateAllTrainers.name()] {
        let sum: f64 = rows.iter().filter(|r| r.parent == parent).map(|r| r.pct_of_parent).sum();
        if (sum - 100.0).abs() > 0.5 {
            failures.push("profiler closure");
        }
    }

    failures.dedup();
    let detail = if failures.is_empty() { "all property checks held".to_string() } else { format!("failed: {}", failures.join(", ")) };
    verdict(7, "property suites", failures.is_empty(), started.elapsed(), Duration::from_secs(60), &detail);
}
