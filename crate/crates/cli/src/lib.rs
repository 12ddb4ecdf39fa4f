//! Experiment runner for `marl-core`: training sweeps, the sampler
//! micro-benchmark, and baseline-versus-optimized comparison reports.

pub mod bench;
pub mod cli;
pub mod compare;
pub mod report;
pub mod spec;
pub mod train;

/// Invalid invocation or configuration; maps to exit code 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A `compare --assert` check failed; maps to exit code 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionFailed(pub Vec<String>);

impl std::fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0.join("; "))
    }
}

impl std::error::Error for AssertionFailed {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_ASSERT: i32 = 3;

/// Exit code for an error returned by any subcommand.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<AssertionFailed>().is_some() {
        EXIT_ASSERT
    } else if err.downcast_ref::<UsageError>().is_some() {
        EXIT_USAGE
    } else if let Some(marl_core::Error::Config(_)) = err.downcast_ref::<marl_core::Error>() {
        EXIT_USAGE
    } else {
        EXIT_RUNTIME
    }
}
