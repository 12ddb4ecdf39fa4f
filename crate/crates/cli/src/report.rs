//! The `report` subcommand: human-readable views of any artifact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use marl_core::profiler::{breakdown, ProfileReport};

use crate::bench::{self, BenchResult};
use crate::compare::{self, read_rewards, ComparisonReport};
use crate::spec::CellConfig;

pub fn render_profile(report: &ProfileReport) -> anyhow::Result<String> {
    let m = &report.meta;
    let mut s = format!(
        "profile: {} {} N={} sampler={}, total {:.3} s\n",
        m.scenario,
        m.algorithm,
        m.n_agents,
        m.sampler,
        report.total_ns as f64 * 1e-9
    );
    for row in breakdown(report)? {
        let _ = writeln!(
            s,
            "  {:<40} {:>12.3} ms {:>7.2}% of {}",
            row.phase,
            row.ns as f64 * 1e-6,
            row.pct_of_parent,
            row.parent
        );
    }
    if report.nesting_violations > 0 {
        let _ = writeln!(s, "  nesting violations: {}", report.nesting_violations);
    }
    Ok(s)
}

pub fn render_stats(path: &Path) -> anyhow::Result<String> {
    let rewards = read_rewards(path)?;
    if rewards.is_empty() {
        return Ok(format!("{}: no episodes\n", path.display()));
    }
    let first = &rewards[..rewards.len().min(100)];
    Ok(format!(
        "{}: {} episodes, first-100 mean reward {:.3}, final-10% mean reward {:.3}\n",
        path.display(),
        rewards.len(),
        first.iter().sum::<f64>() / first.len() as f64,
        crate::train::final_window_mean(&rewards)
    ))
}

fn render_json(path: &Path) -> anyhow::Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(r) = ProfileReport::from_json(&text) {
        return render_profile(&r);
    }
    if let Ok(r) = serde_json::from_str::<ComparisonReport>(&text) {
        return Ok(compare::render(&r));
    }
    if let Ok(r) = serde_json::from_str::<BenchResult>(&text) {
        return Ok(bench::render(&r));
    }
    if let Ok(c) = serde_json::from_str::<CellConfig>(&text) {
        return Ok(serde_json::to_string_pretty(&c)? + "\n");
    }
    anyhow::bail!("{}: not a recognised artifact", path.display())
}

fn render_dir(dir: &Path) -> anyhow::Result<String> {
    let mut s = String::new();
    if dir.join(crate::train::PROFILE_JSON).exists() {
        let run = compare::summarize_run(dir)?;
        let _ = writeln!(
            s,
            "{}: {} episodes, sampler {}, final-10% reward {:.3}, total {:.2} s",
            dir.display(),
            run.episodes,
            run.sampler,
            run.final_window_reward,
            run.total_ns as f64 * 1e-9
        );
        s.push_str(&render_profile(&compare::read_profile(&dir.join(crate::train::PROFILE_JSON))?)?);
        return Ok(s);
    }
    for run in compare::load_sweep(dir)?.values() {
        let _ = writeln!(
            s,
            "N={:<3} seed={:<4} sampler={:<8} episodes={:<6} final-10% reward {:>10.3}  sampling {:>10.1} ms  total {:>8.2} s",
            run.cell.n_agents,
            run.cell.seed,
            run.sampler,
            run.episodes,
            run.final_window_reward,
            run.sampling_ns as f64 * 1e-6,
            run.total_ns as f64 * 1e-9
        );
    }
    Ok(s)
}

/// Renders a run directory, a sweep directory, or a single JSON/CSV artifact.
pub fn render_path(path: &Path) -> anyhow::Result<String> {
    if path.is_dir() {
        return render_dir(path);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => render_json(path),
        Some("csv") => render_stats(path),
        _ => anyhow::bail!("{}: expected a directory, .json or .csv file", path.display()),
    }
}
