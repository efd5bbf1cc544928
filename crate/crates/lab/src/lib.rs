//! Experiment harness for the `enkf` crate.
//!
//! Each experiment is a pure function of an [`ExperimentConfig`] that
//! returns a typed result together with the CSV tables it would write.
//! Monte Carlo runs go through [`mc_driver`], which gives run `i` the
//! random stream `seed + i` and collects results in run order, so output
//! bytes do not depend on the thread count.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod driver;
pub mod experiments;
pub mod metrics;
pub mod table;

pub use config::{resolve, ConfigFile, ExperimentConfig, ExperimentKind, Overrides};
pub use driver::{mc_driver, run_stream};
pub use experiments::{run_experiment, Artifacts};
pub use metrics::{rmse_metric, MetricSeries};
pub use table::Table;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Filter(#[from] enkf::Error),

    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<LabError>,
    },
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Csv(e.to_string())
    }
}
