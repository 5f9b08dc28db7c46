//! Experiment orchestration: configs, presets, seeded replication and output files.

mod bayes;
mod config;
mod emit;
mod exec;
mod plot;
mod record;

pub use bayes::{predictive_probabilities, prior_ensemble_seeded, scores, PREDICTION_RULE};
pub use config::{
    four_mode_target, load_config, synthetic_logistic_target, DatasetSource, ExperimentConfig, ExperimentKind,
    MixtureSpec, Preset, TargetSpec,
};
pub use emit::{emit, format_number, read_csv_table, table_to_csv};
pub use exec::{bayes_benchmark, eps_label, run, THREADS_ENV, VERSION};
pub use plot::Plot;
pub use record::{ExperimentRecord, FinalState, ReplicateRecord, RunRecord, Table};
