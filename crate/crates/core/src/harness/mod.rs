//! Training, evaluation, ablation and sweep drivers.

mod checkpoint;
mod config;
mod data;
mod experiments;
mod metrics;
mod output;
mod train;

pub use checkpoint::{checkpoint_precision, Checkpoint, CHECKPOINT_VERSION};
pub use config::{Level, Precision, TrainConfig, Weighting};
pub use data::{documents, lexicon_for, prepare, Corpus, Document, Features, Prepared};
pub use experiments::{
    ablation_means, ablation_run, ablation_seeds, ablation_tsv, sweep, train, write_file, AblationRow, AblationTable, MeanRow,
    SweepResult, SweepRow, TrainOutput,
};
pub use metrics::{ClassMetrics, EvalReport};
pub use output::{
    attention_records, evaluate_predictions, read_predictions, write_predictions, AttentionRecord, PredictionRecord,
};
pub use train::{class_weights, embedding_table, evaluate, train_model, EpochRecord, RunLog, Trained};
