//! The `bench-sampler` subcommand: uniform versus neighbor mini-batch
//! collection on one large synthetic buffer.

use std::hint::black_box;
use std::time::Instant;

use marl_core::replay::{IndexSampler, NeighborSampler, ReplayBuffer, SamplerKind, UniformSampler};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub buffer_len: usize,
    pub batch: usize,
    pub neighbors: usize,
    /// Measured trials per sampler.
    pub trials: usize,
    /// Leading trials per sampler that are run but not reported.
    pub warmup: usize,
    /// Batches collected inside one timed trial.
    pub batches_per_trial: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            buffer_len: 1_000_000,
            batch: 1024,
            neighbors: 3,
            trials: 30,
            warmup: 3,
            batches_per_trial: 16,
            obs_dim: 20,
            act_dim: 2,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), UsageError> {
        if self.trials == 0 || self.batches_per_trial == 0 || self.batch == 0 {
            return Err(UsageError("trials, batches_per_trial and batch must be positive".into()));
        }
        if self.neighbors == 0 || self.obs_dim == 0 || self.act_dim == 0 {
            return Err(UsageError("neighbors, obs_dim and act_dim must be positive".into()));
        }
        if self.buffer_len < self.batch || self.buffer_len < 2 * self.neighbors + 1 {
            return Err(UsageError(format!(
                "buffer_len {} must be at least the batch ({}) and 2n+1 ({})",
                self.buffer_len,
                self.batch,
                2 * self.neighbors + 1
            )));
        }
        Ok(())
    }
}

/// Per-batch collection times for one sampler, in nanoseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerTiming {
    pub sampler: SamplerKind,
    pub median_ns: f64,
    pub min_ns: f64,
    pub max_ns: f64,
    /// One entry per measured trial.
    pub trials_ns: Vec<f64>,
    pub fallbacks: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub uniform: SamplerTiming,
    pub neighbor: SamplerTiming,
    /// `neighbor.median / uniform.median`.
    pub ratio: f64,
    /// `100 * (uniform - neighbor) / uniform` on medians.
    pub reduction_pct: f64,
    pub fill_ms: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn reduction_pct(baseline: f64, optimized: f64) -> f64 {
    100.0 * (baseline - optimized) / baseline
}

/// Fills a buffer with `len` random transitions.
pub fn synthetic_buffer(len: usize, obs_dim: usize, act_dim: usize, seed: u64) -> marl_core::Result<ReplayBuffer<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = ReplayBuffer::new(len)?;
    let mut obs = vec![0.0; obs_dim];
    let mut next = vec![0.0; obs_dim];
    let mut act = vec![0.0; act_dim];
    for _ in 0..len {
        obs.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        next.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        act.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        buf.push(&obs, &act, rng.random_range(-1.0..1.0), &next, rng.random_bool(0.04))?;
    }
    Ok(buf)
}

struct Arm<'a> {
    sampler: &'a dyn IndexSampler,
    rng: ChaCha8Rng,
    samples: Vec<f64>,
    fallbacks: u64,
}

impl Arm<'_> {
    fn trial(&mut self, buf: &ReplayBuffer<f64>, cfg: &BenchConfig) -> anyhow::Result<f64> {
        let started = Instant::now();
        for _ in 0..cfg.batches_per_trial {
            let draw = self.sampler.draw(&mut self.rng, buf.len(), cfg.batch)?;
            self.fallbacks += u64::from(draw.fell_back);
            black_box(buf.gather(&draw.indices.indices)?);
        }
        Ok(started.elapsed().as_nanos() as f64 / cfg.batches_per_trial as f64)
    }

    fn timing(self, cfg: &BenchConfig) -> SamplerTiming {
        let kept = self.samples[cfg.warmup..].to_vec();
        SamplerTiming {
            sampler: self.sampler.kind(),
            median_ns: median(&kept),
            min_ns: kept.iter().copied().fold(f64::INFINITY, f64::min),
            max_ns: kept.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            trials_ns: kept,
            fallbacks: self.fallbacks,
        }
    }
}

/// Runs both samplers in alternating trials (the leading sampler alternates
/// too) so drift affects both equally.
pub fn run_sampler_bench(cfg: &BenchConfig) -> anyhow::Result<BenchResult> {
    cfg.validate()?;
    let fill = Instant::now();
    let buf = synthetic_buffer(cfg.buffer_len, cfg.obs_dim, cfg.act_dim, cfg.seed)?;
    let fill_ms = fill.elapsed().as_secs_f64() * 1e3;

    let neighbor = NeighborSampler::new(cfg.neighbors)?;
    let mut arms = [
        Arm { sampler: &UniformSampler, rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0001), samples: vec![], fallbacks: 0 },
        Arm { sampler: &neighbor, rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0002), samples: vec![], fallbacks: 0 },
    ];
    for t in 0..cfg.warmup + cfg.trials {
        let order = if t % 2 == 0 { [0, 1] } else { [1, 0] };
        for a in order {
            let ns = arms[a].trial(&buf, cfg)?;
            arms[a].samples.push(ns);
        }
    }
    let [u, n] = arms;
    let uniform = u.timing(cfg);
    let neighbor = n.timing(cfg);
    Ok(BenchResult {
        ratio: neighbor.median_ns / uniform.median_ns,
        reduction_pct: reduction_pct(uniform.median_ns, neighbor.median_ns),
        config: cfg.clone(),
        uniform,
        neighbor,
        fill_ms,
    })
}

pub fn render(result: &BenchResult) -> String {
    let c = &result.config;
    let mut s = format!(
        "sampler benchmark: buffer {} x obs {}, batch {}, n={}, {} trials ({} warmup) of {} batches\n",
        c.buffer_len, c.obs_dim, c.batch, c.neighbors, c.trials, c.warmup, c.batches_per_trial
    );
    for t in [&result.uniform, &result.neighbor] {
        s.push_str(&format!(
            "  {:<9} median {:>10.1} us/batch  (min {:.1}, max {:.1})\n",
            t.sampler.to_string(),
            t.median_ns * 1e-3,
            t.min_ns * 1e-3,
            t.max_ns * 1e-3
        ));
    }
    s.push_str(&format!(
        "  neighbor/uniform {:.3}, reduction {:.2}%\n",
        result.ratio, result.reduction_pct
    ));
    s
}
