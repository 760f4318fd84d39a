//! Seeded multi-run experiments, metrics, comparison tables and result files.
//!
//! An experiment directory holds
//!
//! ```text
//! runs/<method>_<seed>.txt     one record per run
//! table.csv                    mean and standard deviation per method
//! curves/<method>_<seed>.csv   epoch,mse
//! weights/<method>_<seed>.csv  histogram of the final training weights
//! plot.svg                     mean learning curves, shaded ±1 sd
//! ```

mod experiment;
mod export;
mod metrics;
mod record;
pub mod svg;
mod table;

pub use experiment::{
    curve_band, run_experiment, run_method, weight_ratio, ExperimentConfig, ExperimentOutcome, Method, MethodSpec,
    RunResult, RunStatus, Scenario, ScenarioData, TrainingSettings,
};
pub use export::{
    curve_chart, emit_plot_data, export_results, parse_run, read_run_file, read_runs, run_from_record, run_to_record,
    weight_histogram, HISTOGRAM_BINS,
};
pub use metrics::{compute_metrics, mean_std, Metrics};
pub use record::{format_real, Record};
pub use table::{ComparisonTable, MethodSummary};
