//! Experiment orchestration: encoder training under the combined loss,
//! frozen-embedding classification, evaluation, and the C sweep.

mod classifier;
mod config;
mod encoder;
mod experiment;
pub mod io;
mod sweep;

pub use classifier::{train_classifier, Classifier, ClassifierConfig, CvRecord, CvRow, HIDDEN_WIDTHS};
pub use config::RunConfig;
pub use encoder::{embed_dataset, train_encoder, EpochLoss, StepLog, TrainedEncoder};
pub use experiment::{
    evaluate_embeddings, run_experiment, run_experiment_on, write_run_outputs, DataSource,
    DatasetSummary, Evaluation, RunOutcome, RunReport, TestMetrics,
};
pub use sweep::{sweep_c, sweep_c_on, write_sweep_outputs, SweepCell, SweepMean, SweepTable};
