//! Data ingestion, the train/test protocol, cross-validation and experiment
//! orchestration.

mod config;
mod cv;
mod experiment;
mod ingest;
mod plot;
mod split;
pub mod verify;

pub use config::{DataSource, ExperimentConfig, SyntheticSpec};
pub use cv::{cross_validate, Algo, AlgoFamily, CvResult, Family};
pub use experiment::{
    load_data, run_experiment, run_experiment_on, synthetic_params, AlgoResult, ExperimentReport,
};
pub use ingest::{ingest_csv, Ingested};
pub use plot::{format_value, read_plot_table, write_plot_table, PlotTable};
pub use split::{sample_protocol_split, ProtocolSplit};
pub use verify::{bound_sweep, SweepReport};
