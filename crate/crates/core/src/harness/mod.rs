//! Configuration files, multi-seed experiment runs and reports.

mod config;
mod report;
mod run;

pub use config::{ExperimentConfig, PoolSection, RunMode, RunSection};
pub use report::{build_report, invocation_ratio, render_text, write_csv, ReportRow};
pub use run::{
    export_state, read_trace_csv, run_experiment, write_trace_csv, ExperimentSummary, RunSummary, TraceRow,
    CONFIG_ECHO_FILE, FAILED_MARKER, SUMMARY_FILE, SUMMARY_FORMAT, SUMMARY_VERSION, TRACE_SCHEMA,
};
