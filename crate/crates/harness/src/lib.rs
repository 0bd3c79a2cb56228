//! Experiment runner, metrics, CSV/SVG output and timing for `crfmnes`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod plot;
mod serde_name;
pub mod timing;

pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentGrid, RunRecord};
pub use metrics::{read_csv, success_metric, write_csv, MetricRow};
pub use plot::emit_plot;
pub use timing::{timing_bench, TimingRow};
