use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{clip_global_norm, AdamConfig, Graph};
use crate::corpus::{load_embeddings, EmbeddingTable, Vocab, PAD};
use crate::error::{Error, Result};
use crate::model::{ClassWeights, Example, RnModel, EMBEDDING};
use crate::scalar::Scalar;

use super::config::{TrainConfig, Weighting};
use super::data::Prepared;
use super::metrics::EvalReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean of the batch objectives over the epoch.
    pub train_loss: f64,
    pub valid_accuracy: f64,
    pub valid_precision: f64,
    pub valid_recall: f64,
    pub valid_f1: f64,
    /// Wall-clock seconds spent on the epoch.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (highest validation F1, earliest on ties).
    pub best_epoch: usize,
}

impl RunLog {
    /// The log with every wall-clock field zeroed, for comparing runs.
    pub fn without_timing(&self) -> RunLog {
        let mut log = self.clone();
        for e in &mut log.epochs {
            e.seconds = 0.0;
        }
        log
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,valid_accuracy,valid_precision,valid_recall,valid_f1,best,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.3}\n",
                e.epoch,
                e.train_loss,
                e.valid_accuracy,
                e.valid_precision,
                e.valid_recall,
                e.valid_f1,
                (e.epoch == self.best_epoch) as u8,
                e.seconds
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Embedding table for `vocab`: pretrained rows from `cfg.embeddings` when
/// given, seeded uniform rows otherwise.
pub fn embedding_table<T: Scalar>(cfg: &TrainConfig, vocab: &Vocab) -> Result<EmbeddingTable<T>> {
    let trainable = !cfg.static_embeddings;
    match &cfg.embeddings {
        Some(path) => {
            let (table, report) = load_embeddings(path, vocab, cfg.embed_dim, cfg.seed, trainable)?;
            log::info!(
                "embeddings: {} of {} tokens matched ({:.1}%)",
                report.matched,
                vocab.len().saturating_sub(2),
                100.0 * report.coverage
            );
            Ok(table)
        }
        None => Ok(EmbeddingTable::random(vocab.len(), cfg.embed_dim, cfg.seed, trainable)),
    }
}

pub fn class_weights(cfg: &TrainConfig, train: &[Example]) -> ClassWeights {
    let c = cfg.labels.len();
    match cfg.class_weights {
        Weighting::Uniform => ClassWeights::uniform(c),
        Weighting::Inverse => {
            let labels: Vec<usize> = train.iter().filter_map(|e| e.label).collect();
            ClassWeights::inverse_frequency(&labels, c)
        }
    }
}

/// Support-weighted metrics of `model` on labeled `examples`.
pub fn evaluate<T: Scalar>(model: &RnModel<T>, examples: &[Example], labels: &[String], batch_size: usize) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::Data("cannot evaluate an empty dataset".into()));
    }
    let truth = examples
        .iter()
        .map(|e| e.label.ok_or_else(|| Error::Data(format!("example `{}` has no label", e.id))))
        .collect::<Result<Vec<_>>>()?;
    let predicted: Vec<usize> = model.predict_all(examples, batch_size)?.iter().map(|p| p.label).collect();
    EvalReport::from_predictions(&truth, &predicted, labels)
}

fn with_position(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::NonFinite { name, context } => Error::NonFinite {
            name,
            context: format!("{context} (epoch {epoch}, batch {batch})"),
        },
        other => other,
    }
}

/// A trained model and its training history.
#[derive(Debug, Clone)]
pub struct Trained<T: Scalar> {
    /// Parameters of the best validation epoch.
    pub model: RnModel<T>,
    pub log: RunLog,
}

/// Phase two: mini-batch Adam on the prepared training split.
///
/// Batches are reshuffled every epoch from a generator seeded by
/// `cfg.seed`; gradients are clipped to global norm `cfg.clip`. After every
/// epoch the validation split (the training split when there is none) is
/// scored and the parameters with the best weighted F1 are kept.
pub fn train_model<T: Scalar>(cfg: &TrainConfig, data: &Prepared, embeddings: EmbeddingTable<T>) -> Result<Trained<T>> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let mut model = RnModel::build(cfg.model_config(), embeddings, cfg.seed)?;
    let weights = class_weights(cfg, &data.train);
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let select = if data.valid.is_empty() {
        log::warn!("no validation split; model selection uses the training split");
        &data.train
    } else {
        &data.valid
    };
    let batch_size = cfg.batch_size();
    let embeddings_train = model.params.get(EMBEDDING).is_some_and(|p| p.trainable);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut log = RunLog::default();
    let mut best: Option<(f64, RnModel<T>)> = None;

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &data.train[i]).collect();
            let mut g = Graph::new();
            let (loss, _) = model.loss(&mut g, &batch, &weights, cfg.lambda, cfg.l2_squared)?;
            let value = g.value(loss).item().as_f64();
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    name: "loss".into(),
                    context: format!("training diverged at epoch {epoch}, batch {}", b + 1),
                });
            }
            g.backward(loss)?;
            let mut grads = g.param_grads();
            clip_global_norm(&mut grads, cfg.clip);
            model
                .params
                .adam_step(&grads, &adam)
                .map_err(|e| with_position(e, epoch, b + 1))?;
            if embeddings_train {
                if let Some(table) = model.params.value_mut(EMBEDDING) {
                    table.row_mut(PAD).fill(T::zero());
                }
            }
            loss_sum += value;
            batches += 1;
        }
        let report = evaluate(&model, select, &data.labels, batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            valid_accuracy: report.accuracy,
            valid_precision: report.precision,
            valid_recall: report.recall,
            valid_f1: report.f1,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: loss {:.5}, valid f1 {:.4} ({:.1}s)",
            record.train_loss,
            record.valid_f1,
            record.seconds
        );
        if best.as_ref().is_none_or(|(f1, _)| report.f1 > *f1) {
            best = Some((report.f1, model.clone()));
            log.best_epoch = epoch;
        }
        log.epochs.push(record);
    }
    let (_, model) = best.expect("at least one epoch ran");
    Ok(Trained { model, log })
}
