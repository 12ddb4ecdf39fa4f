//! The `compare` subcommand: baseline versus optimized sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use marl_core::profiler::{PhaseId, ProfileReport};
use serde::{Deserialize, Serialize};

use crate::bench::reduction_pct;
use crate::spec::{Cell, CellConfig};
use crate::train::{final_window_mean, CONFIG_FILE, PROFILE_JSON, STATS_FILE};

/// Summary of one run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub cell: Cell,
    pub sampler: String,
    pub episodes: usize,
    pub sampling_ns: u64,
    pub update_ns: u64,
    pub total_ns: u64,
    pub first_window_reward: f64,
    pub final_window_reward: f64,
}

/// Reads the `mean_episode_reward` column of a stats CSV.
pub fn read_rewards(path: &Path) -> anyhow::Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let col = reader
        .headers()?
        .iter()
        .position(|h| h == "mean_episode_reward")
        .with_context(|| format!("{}: no mean_episode_reward column", path.display()))?;
    reader
        .records()
        .map(|r| {
            let r = r?;
            Ok(r.get(col).unwrap_or_default().parse::<f64>()?)
        })
        .collect()
}

pub fn read_profile(path: &Path) -> anyhow::Result<ProfileReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ProfileReport::from_json(&text)?)
}

pub fn summarize_run(dir: &Path) -> anyhow::Result<RunSummary> {
    let cfg: CellConfig = serde_json::from_slice(&fs::read(dir.join(CONFIG_FILE))?)
        .with_context(|| format!("parsing {}", dir.join(CONFIG_FILE).display()))?;
    let profile = read_profile(&dir.join(PROFILE_JSON))?;
    let rewards = read_rewards(&dir.join(STATS_FILE))?;
    let first = &rewards[..rewards.len().min(100)];
    Ok(RunSummary {
        cell: Cell { n_agents: cfg.n_agents, seed: cfg.seed },
        sampler: cfg.trainer.sampler.to_string(),
        episodes: rewards.len(),
        sampling_ns: profile.ns(PhaseId::MiniBatchSampling),
        update_ns: profile.ns(PhaseId::UpdateAllTrainers),
        total_ns: profile.total_ns,
        first_window_reward: first.iter().sum::<f64>() / first.len() as f64,
        final_window_reward: final_window_mean(&rewards),
    })
}

/// Every `n{N}_seed{S}` directory under `root`.
pub fn load_sweep(root: &Path) -> anyhow::Result<BTreeMap<Cell, RunSummary>> {
    let mut runs = BTreeMap::new();
    for entry in fs::read_dir(root).with_context(|| format!("listing {}", root.display()))? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(cell) = name.to_str().and_then(Cell::parse_dir_name) else { continue };
        if entry.file_type()?.is_dir() {
            let run = summarize_run(&entry.path())?;
            if run.cell != cell {
                anyhow::bail!("{}: config.json describes {:?}", entry.path().display(), run.cell);
            }
            runs.insert(cell, run);
        }
    }
    if runs.is_empty() {
        anyhow::bail!("{} contains no n<N>_seed<S> run directories", root.display());
    }
    Ok(runs)
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Paired {
    pub baseline: MeanStd,
    pub optimized: MeanStd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n_agents: usize,
    pub seeds: usize,
    pub sampling_ms: Paired,
    pub sampling_reduction_pct: f64,
    pub total_s: Paired,
    pub total_reduction_pct: f64,
    pub final_reward: Paired,
    /// `100 * (optimized - baseline) / |baseline|` on mean final rewards.
    pub reward_delta_pct: f64,
    pub reward_parity: bool,
}

/// Published figures, shown beside the measured rows for context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublishedReference {
    pub n_agents: usize,
    pub sampling_reduction_pct: f64,
    pub total_reduction_pct: f64,
    pub reward_baseline: f64,
    pub reward_optimized: f64,
}

pub fn published_reference() -> Vec<PublishedReference> {
    [(3, 26.66, 5.6, 21.04, 20.05), (6, 26.68, 7.8, 103.96, 105.94), (12, 27.39, 10.2, 870.39, 872.49)]
        .into_iter()
        .map(|(n_agents, s, t, rb, ro)| PublishedReference {
            n_agents,
            sampling_reduction_pct: s,
            total_reduction_pct: t,
            reward_baseline: rb,
            reward_optimized: ro,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline_sampler: String,
    pub optimized_sampler: String,
    pub parity_tolerance_pct: f64,
    pub rows: Vec<ComparisonRow>,
    pub reference: Vec<PublishedReference>,
}

/// Raised when the two sweeps do not cover the same cells.
#[derive(Debug, PartialEq, Eq)]
pub struct PairingError {
    pub missing_in_baseline: Vec<Cell>,
    pub missing_in_optimized: Vec<Cell>,
}

impl std::fmt::Display for PairingError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let list = |cells: &[Cell]| {
            cells
                .iter()
                .map(|c| format!("(N={}, seed {})", c.n_agents, c.seed))
                .collect::<Vec<_>>()
                .join(", ")
        };
        write!(f, "unpaired runs")?;
        if !self.missing_in_baseline.is_empty() {
            write!(f, "; missing from baseline: {}", list(&self.missing_in_baseline))?;
        }
        if !self.missing_in_optimized.is_empty() {
            write!(f, "; missing from optimized: {}", list(&self.missing_in_optimized))?;
        }
        Ok(())
    }
}

impl std::error::Error for PairingError {}

fn sampler_label(runs: &BTreeMap<Cell, RunSummary>) -> String {
    let mut names: Vec<&str> = runs.values().map(|r| r.sampler.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    names.join("+")
}

pub fn compare_sweeps(
    baseline: &BTreeMap<Cell, RunSummary>,
    optimized: &BTreeMap<Cell, RunSummary>,
    parity_tolerance_pct: f64,
) -> Result<ComparisonReport, PairingError> {
    let missing = |a: &BTreeMap<Cell, RunSummary>, b: &BTreeMap<Cell, RunSummary>| {
        b.keys().filter(|c| !a.contains_key(c)).copied().collect::<Vec<_>>()
    };
    let err = PairingError {
        missing_in_baseline: missing(baseline, optimized),
        missing_in_optimized: missing(optimized, baseline),
    };
    if !err.missing_in_baseline.is_empty() || !err.missing_in_optimized.is_empty() {
        return Err(err);
    }

    let mut by_n: BTreeMap<usize, Vec<(&RunSummary, &RunSummary)>> = BTreeMap::new();
    for (cell, b) in baseline {
        by_n.entry(cell.n_agents).or_default().push((b, &optimized[cell]));
    }
    let rows = by_n
        .into_iter()
        .map(|(n_agents, pairs)| {
            let pair = |f: fn(&RunSummary) -> f64| Paired {
                baseline: MeanStd::of(&pairs.iter().map(|(b, _)| f(b)).collect::<Vec<_>>()),
                optimized: MeanStd::of(&pairs.iter().map(|(_, o)| f(o)).collect::<Vec<_>>()),
            };
            let sampling_ms = pair(|r| r.sampling_ns as f64 * 1e-6);
            let total_s = pair(|r| r.total_ns as f64 * 1e-9);
            let final_reward = pair(|r| r.final_window_reward);
            let reward_delta_pct = 100.0 * (final_reward.optimized.mean - final_reward.baseline.mean)
                / final_reward.baseline.mean.abs();
            ComparisonRow {
                n_agents,
                seeds: pairs.len(),
                sampling_reduction_pct: reduction_pct(sampling_ms.baseline.mean, sampling_ms.optimized.mean),
                total_reduction_pct: reduction_pct(total_s.baseline.mean, total_s.optimized.mean),
                reward_parity: reward_delta_pct.abs() <= parity_tolerance_pct,
                sampling_ms,
                total_s,
                final_reward,
                reward_delta_pct,
            }
        })
        .collect();
    Ok(ComparisonReport {
        baseline_sampler: sampler_label(baseline),
        optimized_sampler: sampler_label(optimized),
        parity_tolerance_pct,
        rows,
        reference: published_reference(),
    })
}

pub fn compare_dirs(baseline: &Path, optimized: &Path, parity_tolerance_pct: f64) -> anyhow::Result<ComparisonReport> {
    let b = load_sweep(baseline)?;
    let o = load_sweep(optimized)?;
    Ok(compare_sweeps(&b, &o, parity_tolerance_pct)?)
}

/// Rows whose total training time regressed by more than `max_regression_pct`.
pub fn regressions(report: &ComparisonReport, max_regression_pct: f64) -> Vec<String> {
    report
        .rows
        .iter()
        .filter(|r| !(r.total_reduction_pct >= -max_regression_pct))
        .map(|r| {
            format!(
                "N={}: total time {:.2}% slower than baseline (limit {max_regression_pct}%)",
                r.n_agents, -r.total_reduction_pct
            )
        })
        .collect()
}

pub fn render(report: &ComparisonReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} (baseline) vs {} (optimized)", report.baseline_sampler, report.optimized_sampler);
    let _ = writeln!(
        s,
        "{:>3} {:>5} | {:>21} {:>21} {:>7} | {:>19} {:>19} {:>7} | {:>19} {:>19} {:>7}",
        "N", "seeds", "sampling ms (base)", "sampling ms (opt)", "red %", "total s (base)", "total s (opt)", "red %",
        "reward (base)", "reward (opt)", "delta %"
    );
    let ms = |m: MeanStd| format!("{:.1} ± {:.1}", m.mean, m.std);
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:>3} {:>5} | {:>21} {:>21} {:>7.2} | {:>19} {:>19} {:>7.2} | {:>19} {:>19} {:>7.2}{}",
            r.n_agents,
            r.seeds,
            ms(r.sampling_ms.baseline),
            ms(r.sampling_ms.optimized),
            r.sampling_reduction_pct,
            ms(r.total_s.baseline),
            ms(r.total_s.optimized),
            r.total_reduction_pct,
            ms(r.final_reward.baseline),
            ms(r.final_reward.optimized),
            r.reward_delta_pct,
            if r.reward_parity { "" } else { "  reward parity violated" }
        );
    }
    let _ = writeln!(s, "published reference (different hardware, framework and environment constants):");
    for p in &report.reference {
        let _ = writeln!(
            s,
            "{:>3}       sampling red {:>6.2}%   total red {:>5.1}%   reward {:.2} -> {:.2}",
            p.n_agents, p.sampling_reduction_pct, p.total_reduction_pct, p.reward_baseline, p.reward_optimized
        );
    }
    s
}
