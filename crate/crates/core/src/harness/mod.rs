//! Monte Carlo harness, result tables and the fit/forecast path for
//! external data.

pub mod config;
pub mod estimate;
pub mod practitioner;
pub mod run;
pub mod table;

pub use config::{
    parse_config, Cell, EstimatorKnobs, ExperimentConfig, KernelChoice, Method, CONFIG_HELP,
};
pub use estimate::{Diagnostics, Evaluator, FittedModel, Prepared};
pub use practitioner::{fit, forecast, parse_data, read_data, FitSummary, ForecastReport};
pub use run::{mean_sd, run_experiment, run_experiment_detailed, RepRecord, ResultRow};
pub use table::{emit_table, parse_table, render_records, TableFormat, TableRecord, CSV_HEADER};
