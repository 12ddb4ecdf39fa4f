//! Argument parsing and subcommand dispatch.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use marl_core::envs::Scenario;
use marl_core::replay::SamplerKind;
use marl_core::trainers::Algorithm;

use crate::bench::{self, BenchConfig};
use crate::compare;
use crate::spec::ExperimentSpec;
use crate::{report, train, AssertionFailed};

#[derive(Parser, Debug)]
#[command(name = "marl-bench", version, about = "Multi-agent actor-critic training and sampling benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train every (agent count, seed) cell and write its artifacts.
    Train(TrainArgs),
    /// Time uniform against neighbor mini-batch collection on a synthetic buffer.
    BenchSampler(BenchArgs),
    /// Compare a baseline sweep directory with an optimized one.
    Compare(CompareArgs),
    /// Pretty-print a run directory, sweep directory, or artifact file.
    Report(ReportArgs),
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// JSON experiment file; flags override its values.
    #[arg(long, env = "MARL_BENCH_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "MARL_BENCH_SCENARIO")]
    pub scenario: Option<Scenario>,
    /// Comma-separated agent counts to sweep.
    #[arg(long, env = "MARL_BENCH_AGENTS", value_delimiter = ',')]
    pub agents: Option<Vec<usize>>,
    #[arg(long, env = "MARL_BENCH_ALGO")]
    pub algo: Option<Algorithm>,
    #[arg(long, env = "MARL_BENCH_SAMPLER")]
    pub sampler: Option<SamplerKind>,
    #[arg(long, env = "MARL_BENCH_NEIGHBORS")]
    pub neighbors: Option<usize>,
    #[arg(long, env = "MARL_BENCH_EPISODES")]
    pub episodes: Option<usize>,
    /// First seed; repetitions use consecutive seeds.
    #[arg(long, env = "MARL_BENCH_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "MARL_BENCH_REPETITIONS")]
    pub repetitions: Option<usize>,
    #[arg(long, env = "MARL_BENCH_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "MARL_BENCH_JOBS")]
    pub jobs: Option<usize>,
    #[arg(long, env = "MARL_BENCH_BATCH_SIZE")]
    pub batch_size: Option<usize>,
    #[arg(long, env = "MARL_BENCH_UPDATE_EVERY")]
    pub update_every: Option<usize>,
    #[arg(long, env = "MARL_BENCH_BUFFER_CAPACITY")]
    pub buffer_capacity: Option<usize>,
    #[arg(long, env = "MARL_BENCH_PREY")]
    pub prey: Option<usize>,
    #[arg(long)]
    pub no_checkpoints: bool,
}

impl TrainArgs {
    pub fn to_spec(&self) -> anyhow::Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::from_file(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(s) = self.scenario {
            spec.scenario = s;
        }
        if let Some(a) = &self.agents {
            spec.agents = a.clone();
        }
        let t = &mut spec.trainer;
        if let Some(a) = self.algo {
            t.algorithm = a;
        }
        if let Some(s) = self.sampler {
            t.sampler = s;
        }
        if let Some(n) = self.neighbors {
            t.neighbors = n;
        }
        if let Some(e) = self.episodes {
            t.episodes = e;
        }
        if let Some(b) = self.batch_size {
            t.batch_size = b;
        }
        if let Some(u) = self.update_every {
            t.update_every = u;
        }
        if let Some(c) = self.buffer_capacity {
            t.buffer_capacity = c;
        }
        if self.seed.is_some() || self.repetitions.is_some() {
            let first = self.seed.unwrap_or_else(|| spec.seeds.first().copied().unwrap_or(0));
            let reps = self.repetitions.unwrap_or(spec.seeds.len().max(1)) as u64;
            spec.seeds = (first..first + reps).collect();
        }
        if let Some(m) = self.prey {
            spec.env.n_prey = Some(m);
        }
        if let Some(o) = &self.out {
            spec.out = o.clone();
        }
        if let Some(j) = self.jobs {
            spec.jobs = j;
        }
        if self.no_checkpoints {
            spec.checkpoints = false;
        }
        Ok(spec)
    }
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, env = "MARL_BENCH_BUFFER_LEN", default_value_t = 1_000_000)]
    pub buffer_len: usize,
    #[arg(long, env = "MARL_BENCH_BATCH", default_value_t = 1024)]
    pub batch: usize,
    #[arg(long, env = "MARL_BENCH_NEIGHBORS", default_value_t = 3)]
    pub neighbors: usize,
    #[arg(long, env = "MARL_BENCH_TRIALS", default_value_t = 30)]
    pub trials: usize,
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
    #[arg(long, default_value_t = 16)]
    pub batches_per_trial: usize,
    #[arg(long, default_value_t = 20)]
    pub obs_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub act_dim: usize,
    #[arg(long, env = "MARL_BENCH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON result here instead of stdout.
    #[arg(long, env = "MARL_BENCH_OUT")]
    pub out: Option<PathBuf>,
}

impl BenchArgs {
    pub fn to_config(&self) -> BenchConfig {
        BenchConfig {
            buffer_len: self.buffer_len,
            batch: self.batch,
            neighbors: self.neighbors,
            trials: self.trials,
            warmup: self.warmup,
            batches_per_trial: self.batches_per_trial,
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    pub baseline: PathBuf,
    pub optimized: PathBuf,
    /// Exit with code 3 if total training time regresses beyond the limit.
    #[arg(long)]
    pub assert: bool,
    #[arg(long, default_value_t = 2.0)]
    pub max_regression_pct: f64,
    #[arg(long, default_value_t = 10.0)]
    pub parity_pct: f64,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    pub path: PathBuf,
}

fn write_or_print(out: Option<&Path>, json: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, json)?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => {
            let spec = args.to_spec()?;
            spec.validate()?;
            fs::create_dir_all(&spec.out)?;
            fs::write(spec.out.join("experiment.json"), serde_json::to_string_pretty(&spec)?)?;
            for s in train::cmd_train(&spec)? {
                println!(
                    "{}: {} episodes, final-10% reward {:.3}, {:.2} s",
                    s.dir.display(),
                    s.episodes,
                    s.final_window_reward,
                    s.total_ns as f64 * 1e-9
                );
            }
        }
        Command::BenchSampler(args) => {
            let result = bench::run_sampler_bench(&args.to_config())?;
            eprint!("{}", bench::render(&result));
            write_or_print(args.out.as_deref(), &serde_json::to_string_pretty(&result)?)?;
        }
        Command::Compare(args) => {
            let report = compare::compare_dirs(&args.baseline, &args.optimized, args.parity_pct)?;
            print!("{}", compare::render(&report));
            if let Some(out) = &args.out {
                write_or_print(Some(out), &serde_json::to_string_pretty(&report)?)?;
            }
            if args.assert {
                let failures = compare::regressions(&report, args.max_regression_pct);
                if !failures.is_empty() {
                    return Err(AssertionFailed(failures).into());
                }
            }
        }
        Command::Report(args) => print!("{}", report::render_path(&args.path)?),
    }
    Ok(())
}
