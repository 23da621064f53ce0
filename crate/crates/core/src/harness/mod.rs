//! Declarative experiment runner: grids of policies over task suites,
//! results archives and metric reports.

mod archive;
mod replay;
mod report;
mod run;
mod spec;

pub use archive::{read_archive, read_records, write_archive, Archive, ArchiveMeta, LOG, META, RECORDS, SPEC};
pub use replay::{export_trace, replay, replay_trace, ReplayReport};
pub use report::{pareto_points, report_archive, ParetoPoint, PARETO, RATIOS, REPORT};
pub use run::{render, run, task_params, task_seed, CellFailure, RunOutput};
pub use spec::{GridPoint, ModelEntry, RunSpec, SuiteSpec, Sweep, Timing, DEFAULT_BUDGETS};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "VLCBENCH_OUT";
