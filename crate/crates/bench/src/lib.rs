//! Experiment harness: runs solver matrices over generated or stored
//! instances and writes gap and timing reports.

pub mod error;
pub mod report;
pub mod run;
pub mod spec;

use std::path::Path;

pub use error::{BenchError, Result};
pub use report::{aggregate, read_rows, render, render_markdown, Aggregate, Format, Metric};
pub use run::{run, BenchReport, Row, RunOptions};
pub use spec::{ExperimentKind, ExperimentSpec, InstanceSource, Plan, SolverKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SPEC_INVALID: i32 = 2;
/// Some solver runs failed; the report was still written.
pub const EXIT_PARTIAL: i32 = 3;

/// Prepares, runs and writes one experiment into `out`.
pub fn bench(spec: ExperimentSpec, out: &Path, opts: RunOptions) -> Result<BenchReport> {
    let plan = Plan::prepare(spec)?;
    let report = run(&plan, opts)?;
    report::write_report(&report, out)?;
    Ok(report)
}
