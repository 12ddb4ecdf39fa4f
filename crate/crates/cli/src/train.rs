//! The `train` subcommand: one artifact directory per sweep cell.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use marl_core::trainers::{save_checkpoint, EpisodeStats, Trainer};
use serde::{Deserialize, Serialize};

use crate::spec::{Cell, ExperimentSpec};

pub const STATS_FILE: &str = "stats.csv";
pub const PROFILE_JSON: &str = "profile.json";
pub const PROFILE_CSV: &str = "profile.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub dir: PathBuf,
    pub episodes: usize,
    pub final_window_reward: f64,
    pub total_ns: u64,
    pub update_rounds: u64,
}

/// Mean of `mean_reward` over the last `ceil(len / 10)` episodes.
pub fn final_window_mean(stats: &[f64]) -> f64 {
    if stats.is_empty() {
        return f64::NAN;
    }
    let w = stats.len().div_ceil(10);
    stats[stats.len() - w..].iter().sum::<f64>() / w as f64
}

/// Trains one cell. Stats rows are written as episodes finish, and the
/// profile is written even when training aborts, so partial runs keep their
/// artifacts.
pub fn run_cell(spec: &ExperimentSpec, cell: Cell) -> anyhow::Result<CellSummary> {
    let dir = spec.cell_dir(cell);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let cfg = spec.cell_config(cell);
    fs::write(dir.join(CONFIG_FILE), serde_json::to_string_pretty(&cfg)?)?;

    let mut trainer = Trainer::<f64>::new(cfg.trainer.clone(), cfg.env.clone())?;
    let mut stats_out = BufWriter::new(File::create(dir.join(STATS_FILE))?);
    writeln!(stats_out, "{}", EpisodeStats::csv_header(cell.n_agents))?;

    let mut rewards = Vec::with_capacity(cfg.trainer.episodes);
    let mut outcome = Ok(());
    for _ in 0..cfg.trainer.episodes {
        match trainer.run_episode() {
            Ok(s) => {
                writeln!(stats_out, "{}", s.csv_row())?;
                rewards.push(s.mean_reward);
            }
            Err(e) => {
                outcome = Err(e);
                break;
            }
        }
    }
    stats_out.flush()?;
    let report = trainer.report();
    fs::write(dir.join(PROFILE_JSON), report.to_json()?)?;
    report.write_csv(BufWriter::new(File::create(dir.join(PROFILE_CSV))?))?;
    outcome.with_context(|| format!("training n={} seed={} after {} episodes", cell.n_agents, cell.seed, rewards.len()))?;

    if spec.checkpoints {
        save_checkpoint(&dir.join(CHECKPOINT_DIR), &trainer.agents, &cfg.trainer, &cfg.env)?;
    }
    Ok(CellSummary {
        cell,
        dir,
        episodes: rewards.len(),
        final_window_reward: final_window_mean(&rewards),
        total_ns: report.total_ns,
        update_rounds: trainer.counters.applied,
    })
}

/// Runs every cell of the sweep, on `spec.jobs` threads.
pub fn cmd_train(spec: &ExperimentSpec) -> anyhow::Result<Vec<CellSummary>> {
    spec.validate()?;
    let cells = spec.cells();
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(cells.len()));
    let workers = spec.jobs.min(cells.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&cell) = cells.get(k) else { break };
                log::info!("training {}", cell.dir_name());
                let r = run_cell(spec, cell);
                if let Ok(s) = &r {
                    log::info!(
                        "{}: final-window reward {:.3}, {:.1} s",
                        cell.dir_name(),
                        s.final_window_reward,
                        s.total_ns as f64 * 1e-9
                    );
                }
                results.lock().expect("worker panicked").push((k, r));
            });
        }
    });
    let mut results = results.into_inner().expect("worker panicked");
    results.sort_by_key(|(k, _)| *k);
    results.into_iter().map(|(_, r)| r).collect()
}
