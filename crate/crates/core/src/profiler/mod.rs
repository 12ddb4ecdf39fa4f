//! Hierarchical wall-clock phase accounting.
//!
//! Phases form a fixed two-level tree: five top-level phases, with the four
//! update sub-phases nested under [`PhaseId::UpdateAllTrainers`]. Time that no
//! phase claims is reported as an `unattributed` residual by [`breakdown`].

mod report;

use std::cell::RefCell;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use report::{breakdown, growth_rate, BreakdownRow, GrowthReport, PhaseStats, ProfileReport, ReportMeta};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseId {
    ActionSelection,
    EnvStep,
    ExperienceCollection,
    UpdateAllTrainers,
    MiniBatchSampling,
    TargetQCalc,
    QLoss,
    PLoss,
    Other,
}

impl PhaseId {
    pub const ALL: [PhaseId; 9] = [
        PhaseId::ActionSelection,
        PhaseId::EnvStep,
        PhaseId::ExperienceCollection,
        PhaseId::UpdateAllTrainers,
        PhaseId::MiniBatchSampling,
        PhaseId::TargetQCalc,
        PhaseId::QLoss,
        PhaseId::PLoss,
        PhaseId::Other,
    ];

    pub const TOP_LEVEL: [PhaseId; 5] = [
        PhaseId::ActionSelection,
        PhaseId::EnvStep,
        PhaseId::ExperienceCollection,
        PhaseId::UpdateAllTrainers,
        PhaseId::Other,
    ];

    pub const UPDATE_CHILDREN: [PhaseId; 4] = [
        PhaseId::MiniBatchSampling,
        PhaseId::TargetQCalc,
        PhaseId::QLoss,
        PhaseId::PLoss,
    ];

    pub fn parent(self) -> Option<PhaseId> {
        match self {
            PhaseId::MiniBatchSampling | PhaseId::TargetQCalc | PhaseId::QLoss | PhaseId::PLoss => {
                Some(PhaseId::UpdateAllTrainers)
            }
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseId::ActionSelection => "action-selection",
            PhaseId::EnvStep => "env-step",
            PhaseId::ExperienceCollection => "experience-collection",
            PhaseId::UpdateAllTrainers => "update-all-trainers",
            PhaseId::MiniBatchSampling => "mini-batch-sampling",
            PhaseId::TargetQCalc => "target-q-calc",
            PhaseId::QLoss => "q-loss",
            PhaseId::PLoss => "p-loss",
            PhaseId::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<PhaseId> {
        PhaseId::ALL.into_iter().find(|p| p.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PhaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What to do when a scope is opened somewhere the phase tree forbids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NestingPolicy {
    /// Panic immediately.
    FailFast,
    /// Log, count in [`ProfileReport::nesting_violations`], and record nothing.
    WarnAndCount,
}

impl Default for NestingPolicy {
    fn default() -> Self {
        if cfg!(debug_assertions) {
            NestingPolicy::FailFast
        } else {
            NestingPolicy::WarnAndCount
        }
    }
}

/// Extension point for attaching an external counter source (perf events,
/// cache-miss counters, ...) to every scope.
pub trait ScopeHook {
    fn enter(&mut self, phase: PhaseId);
    fn exit(&mut self, phase: PhaseId, elapsed_ns: u64);
}

struct Inner {
    report: ProfileReport,
    stack: Vec<PhaseId>,
}

/// Single-threaded phase recorder. Scopes borrow it immutably so they can nest.
pub struct Profiler {
    inner: RefCell<Inner>,
    hook: RefCell<Option<Box<dyn ScopeHook>>>,
    started: Instant,
    policy: NestingPolicy,
}

impl Profiler {
    pub fn new(meta: ReportMeta) -> Self {
        Self::with_policy(meta, NestingPolicy::default())
    }

    pub fn with_policy(meta: ReportMeta, policy: NestingPolicy) -> Self {
        Self {
            inner: RefCell::new(Inner {
                report: ProfileReport::empty(meta),
                stack: Vec::new(),
            }),
            hook: RefCell::new(None),
            started: Instant::now(),
            policy,
        }
    }

    pub fn set_hook(&self, hook: Box<dyn ScopeHook>) {
        *self.hook.borrow_mut() = Some(hook);
    }

    /// Opens a timed scope; time is credited when the guard drops.
    pub fn scope(&self, phase: PhaseId) -> PhaseScope<'_> {
        let legal = {
            let mut inner = self.inner.borrow_mut();
            let top = inner.stack.last().copied();
            let legal = top == phase.parent();
            if legal {
                inner.stack.push(phase);
            } else {
                inner.report.nesting_violations += 1;
            }
            legal
        };
        if !legal {
            let parent = self.inner.borrow().stack.last().copied();
            match self.policy {
                NestingPolicy::FailFast => {
                    panic!("illegal profiler nesting: {phase} opened inside {parent:?}")
                }
                NestingPolicy::WarnAndCount => {
                    log::warn!("illegal profiler nesting: {phase} opened inside {parent:?}; not recorded");
                }
            }
            return PhaseScope {
                profiler: self,
                phase,
                start: None,
            };
        }
        if let Some(h) = self.hook.borrow_mut().as_mut() {
            h.enter(phase);
        }
        PhaseScope {
            profiler: self,
            phase,
            start: Some(Instant::now()),
        }
    }

    /// Runs `f` inside a scope for `phase`.
    pub fn time<T>(&self, phase: PhaseId, f: impl FnOnce() -> T) -> T {
        let _scope = self.scope(phase);
        f()
    }

    fn close(&self, phase: PhaseId, start: Instant) {
        let ns = start.elapsed().as_nanos() as u64;
        {
            let mut inner = self.inner.borrow_mut();
            let popped = inner.stack.pop();
            debug_assert_eq!(popped, Some(phase), "profiler scopes closed out of order");
            let stats = &mut inner.report.phases[phase.index()];
            stats.ns += ns;
            stats.count += 1;
        }
        if let Some(h) = self.hook.borrow_mut().as_mut() {
            h.exit(phase, ns);
        }
    }

    /// Current accumulated report, with total time measured up to now.
    pub fn snapshot(&self) -> ProfileReport {
        let mut r = self.inner.borrow().report.clone();
        r.total_ns = self.started.elapsed().as_nanos() as u64;
        r
    }

    pub fn finish(self) -> ProfileReport {
        self.snapshot()
    }

    pub fn meta_mut(&self) -> std::cell::RefMut<'_, ReportMeta> {
        std::cell::RefMut::map(self.inner.borrow_mut(), |i| &mut i.report.meta)
    }
}

/// Guard returned by [`Profiler::scope`].
pub struct PhaseScope<'a> {
    profiler: &'a Profiler,
    phase: PhaseId,
    start: Option<Instant>,
}

impl Drop for PhaseScope<'_> {
    fn drop(&mut self) {
        if let Some(start) = self.start {
            self.profiler.close(self.phase, start);
        }
    }
}
