use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::PhaseId;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub ns: u64,
    pub count: u64,
}

/// Run description echoed into every serialized report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub n_agents: usize,
    pub algorithm: String,
    pub sampler: String,
    pub scenario: String,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileReport {
    pub meta: ReportMeta,
    pub(super) phases: [PhaseStats; 9],
    pub total_ns: u64,
    pub nesting_violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub phase: String,
    pub parent: String,
    pub ns: u64,
    pub pct_of_parent: f64,
}

pub const UNATTRIBUTED: &str = "unattributed";
pub const TOTAL: &str = "total";

#[derive(Serialize, Deserialize)]
struct PhaseJson {
    name: String,
    parent: String,
    ns: u64,
    count: u64,
    pct_of_parent: f64,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    meta: ReportMeta,
    total_ns: u64,
    #[serde(default)]
    nesting_violations: u64,
    phases: Vec<PhaseJson>,
}

impl ProfileReport {
    pub fn empty(meta: ReportMeta) -> Self {
        Self {
            meta,
            phases: [PhaseStats::default(); 9],
            total_ns: 0,
            nesting_violations: 0,
        }
    }

    pub fn phase(&self, id: PhaseId) -> PhaseStats {
        self.phases[id as usize]
    }

    pub fn ns(&self, id: PhaseId) -> u64 {
        self.phase(id).ns
    }

    pub fn count(&self, id: PhaseId) -> u64 {
        self.phase(id).count
    }

    /// Adds time directly; for offline construction and merging.
    pub fn record(&mut self, id: PhaseId, ns: u64, count: u64) {
        let s = &mut self.phases[id as usize];
        s.ns += ns;
        s.count += count;
    }

    /// Sums another report into this one (e.g. repeated seeds).
    pub fn merge(&mut self, other: &ProfileReport) {
        for id in PhaseId::ALL {
            let s = other.phase(id);
            self.record(id, s.ns, s.count);
        }
        self.total_ns += other.total_ns;
        self.nesting_violations += other.nesting_violations;
    }

    /// `ns / count` for a phase, or `None` when it never ran.
    pub fn mean_ns(&self, id: PhaseId) -> Option<f64> {
        let s = self.phase(id);
        (s.count > 0).then(|| s.ns as f64 / s.count as f64)
    }

    /// Share of total wall time, in percent.
    pub fn share_of_total(&self, id: PhaseId) -> f64 {
        if self.total_ns == 0 {
            0.0
        } else {
            100.0 * self.ns(id) as f64 / self.total_ns as f64
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let pct: BTreeMap<String, f64> = breakdown(self)
            .unwrap_or_default()
            .into_iter()
            .map(|r| (r.phase, r.pct_of_parent))
            .collect();
        let phases = PhaseId::ALL
            .iter()
            .map(|&id| PhaseJson {
                name: id.name().to_string(),
                parent: id.parent().map_or(TOTAL, |p| p.name()).to_string(),
                ns: self.ns(id),
                count: self.count(id),
                pct_of_parent: pct.get(id.name()).copied().unwrap_or(0.0),
            })
            .collect();
        let json = ReportJson {
            meta: self.meta.clone(),
            total_ns: self.total_ns,
            nesting_violations: self.nesting_violations,
            phases,
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: ReportJson = serde_json::from_str(text)?;
        let mut report = ProfileReport::empty(json.meta);
        report.total_ns = json.total_ns;
        report.nesting_violations = json.nesting_violations;
        for p in json.phases {
            let id = PhaseId::from_name(&p.name)
                .ok_or_else(|| Error::Format(format!("unknown phase {:?}", p.name)))?;
            report.record(id, p.ns, p.count);
        }
        Ok(report)
    }

    /// `name,parent,ns,count,pct_of_parent`, one row per phase plus residuals.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "name,parent,ns,count,pct_of_parent")?;
        let rows = breakdown(self).unwrap_or_default();
        for row in rows {
            let count = PhaseId::from_name(&row.phase).map_or(0, |id| self.count(id));
            writeln!(out, "{},{},{},{},{:.4}", row.phase, row.parent, row.ns, count, row.pct_of_parent)?;
        }
        Ok(())
    }
}

fn level(rows: &mut Vec<BreakdownRow>, parent: &str, parent_ns: u64, children: &[(String, u64)]) {
    let claimed: u64 = children.iter().map(|(_, ns)| ns).sum();
    let residual = parent_ns.saturating_sub(claimed);
    let pct = |ns: u64| 100.0 * ns as f64 / parent_ns as f64;
    for (name, ns) in children {
        rows.push(BreakdownRow {
            phase: name.clone(),
            parent: parent.to_string(),
            ns: *ns,
            pct_of_parent: pct(*ns),
        });
    }
    rows.push(BreakdownRow {
        phase: format!("{UNATTRIBUTED}:{parent}"),
        parent: parent.to_string(),
        ns: residual,
        pct_of_parent: pct(residual),
    });
}

/// Percent of parent time for every phase, with one `unattributed` residual
/// row per tree level so each level sums to 100.
pub fn breakdown(report: &ProfileReport) -> Result<Vec<BreakdownRow>> {
    if report.total_ns == 0 {
        return Err(Error::EmptyReport);
    }
    let mut rows = Vec::new();
    let named = |ids: &[PhaseId]| ids.iter().map(|&id| (id.name().to_string(), report.ns(id))).collect::<Vec<_>>();
    level(&mut rows, TOTAL, report.total_ns, &named(&PhaseId::TOP_LEVEL));
    let update_ns = report.ns(PhaseId::UpdateAllTrainers);
    if update_ns > 0 {
        level(
            &mut rows,
            PhaseId::UpdateAllTrainers.name(),
            update_ns,
            &named(&PhaseId::UPDATE_CHILDREN),
        );
    }
    Ok(rows)
}

/// Per-phase `time_b / time_a`; `None` marks an undefined ratio (zero denominator).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub phases: Vec<(PhaseId, Option<f64>)>,
    pub total: Option<f64>,
}

impl GrowthReport {
    pub fn ratio(&self, id: PhaseId) -> Option<f64> {
        self.phases.iter().find(|(p, _)| *p == id).and_then(|(_, r)| *r)
    }
}

fn ratio(b: u64, a: u64) -> Option<f64> {
    (a > 0).then(|| b as f64 / a as f64)
}

/// Growth from run `a` to the larger run `b`.
pub fn growth_rate(a: &ProfileReport, b: &ProfileReport) -> GrowthReport {
    GrowthReport {
        phases: PhaseId::ALL.iter().map(|&id| (id, ratio(b.ns(id), a.ns(id)))).collect(),
        total: ratio(b.total_ns, a.total_ns),
    }
}
