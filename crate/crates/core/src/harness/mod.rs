//! Experiment harness: seeded Monte-Carlo runs over planted instances,
//! CSV persistence, summaries, and the ad-hoc `fit` workflow.

pub mod config;
pub mod experiment;
pub mod fit;
pub mod format;
pub mod records;
pub mod summary;

pub use experiment::{
    execute, grid_points, run_experiment, ExperimentConfig, ExperimentKind, GridPoint, LambdaChoice,
    Profile, RunOutput, SparsityRule,
};
pub use fit::{run_fit, FitOptions, FitPenalty, FitReport};
pub use records::{read_trials, write_trials, CsvMeta, TrialRecord, CSV_VERSION, TRIAL_COLUMNS};
pub use summary::{summarize_file, summarize_records, write_summary, ColumnStats, SummaryRow};
