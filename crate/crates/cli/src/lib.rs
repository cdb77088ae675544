//! Command-line front end for the hyperfed engine: dataset files in a plain
//! text format, experiment orchestration across the five ablation modes, and
//! deterministic metrics CSV output.

pub mod dataset;
pub mod experiment;
pub mod metrics;

pub use dataset::{
    load_dataset, parse_dataset, write_dataset, DatasetError, FeatureEncoding, LoadReport,
};
pub use experiment::{
    run_experiment, run_single, ExpError, ExperimentConfig, ExperimentOutput, Mode, TransportKind,
};
pub use metrics::{MetricsError, MetricsRecord, Summary};

/// Print one line to stdout, exiting quietly if the reader has gone away.
///
/// Piping into `head` closes stdout early; a bare `println!` would then
/// panic with a backtrace. 141 is the conventional exit status of a process
/// ended by a closed pipe (128 + SIGPIPE).
pub fn report_line(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if writeln!(out, "{line}").is_err() {
        std::process::exit(141);
    }
}
