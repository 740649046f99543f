use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{load_lexicon, Lexicon};
use crate::model::Variant;
use crate::scalar::Scalar;

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::data::{documents, lexicon_for, prepare, Corpus, Features, Prepared};
use super::metrics::EvalReport;
use super::train::{embedding_table, evaluate, train_model, RunLog};

/// Result of a full run: the checkpoint of the best epoch, its log and the
/// prepared data it was trained on.
#[derive(Debug, Clone)]
pub struct TrainOutput<T: Scalar> {
    pub checkpoint: Checkpoint<T>,
    pub log: RunLog,
    pub data: Prepared,
}

/// Both training phases: indicators (vocabulary, topic model, lexicon) and then the classifier.
pub fn train<T: Scalar>(cfg: &TrainConfig, corpus: &Corpus) -> Result<TrainOutput<T>> {
    cfg.validate()?;
    let data = prepare(cfg, corpus, lexicon_for(cfg)?)?;
    let table = embedding_table::<T>(cfg, &data.features.vocab)?;
    let trained = train_model(cfg, &data, table)?;
    Ok(TrainOutput {
        checkpoint: Checkpoint::new(cfg, &data.labels, &data.features, trained.model, trained.log.best_epoch),
        log: trained.log,
        data,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub best_epoch: usize,
    /// Metrics on the test split (validation split when there is no test split).
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, v: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == v)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("variant\taccuracy\tprecision\trecall\tf1\tbest_epoch\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\n",
                r.variant, r.report.accuracy, r.report.precision, r.report.recall, r.report.f1, r.best_epoch
            ));
        }
        out
    }
}

/// Trains each variant on the same prepared data with the same seed and budget.
pub fn ablation_run<T: Scalar>(cfg: &TrainConfig, data: &Prepared, variants: &[Variant]) -> Result<AblationTable> {
    if variants.len() < 2 {
        return Err(Error::Config("an ablation needs at least two variants".into()));
    }
    let eval_split = if data.test.is_empty() { &data.valid } else { &data.test };
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let run = TrainConfig {
            variant,
            ..cfg.clone()
        };
        let table = embedding_table::<T>(&run, &data.features.vocab)?;
        let trained = train_model(&run, data, table)?;
        let report = evaluate(&trained.model, eval_split, &data.labels, run.batch_size())?;
        log::info!("ablation {variant}: test f1 {:.4}", report.f1);
        rows.push(AblationRow {
            variant,
            best_epoch: trained.log.best_epoch,
            report,
        });
    }
    Ok(AblationTable { rows })
}

/// Runs the ablation once per seed. The seed drives the topic model, the
/// initialization and the batch order; the corpus is the same for every run.
pub fn ablation_seeds<T: Scalar>(
    cfg: &TrainConfig,
    corpus: &Corpus,
    variants: &[Variant],
    seeds: &[u64],
) -> Result<Vec<AblationTable>> {
    if seeds.is_empty() {
        return Err(Error::Config("an ablation needs at least one seed".into()));
    }
    let lexicon = lexicon_for(cfg)?;
    seeds
        .iter()
        .map(|&seed| {
            let run = TrainConfig { seed, ..cfg.clone() };
            run.validate()?;
            let data = prepare(&run, corpus, lexicon.clone())?;
            ablation_run::<T>(&run, &data, variants)
        })
        .collect()
}

/// Weighted metrics of one variant averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub variant: Variant,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub seeds: usize,
}

/// Seed-means per variant, in the row order of the first table.
pub fn ablation_means(tables: &[AblationTable]) -> Vec<MeanRow> {
    let Some(first) = tables.first() else {
        return Vec::new();
    };
    first
        .rows
        .iter()
        .map(|r| {
            let reports: Vec<&EvalReport> = tables.iter().filter_map(|t| t.row(r.variant)).map(|r| &r.report).collect();
            let n = reports.len() as f64;
            let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
            MeanRow {
                variant: r.variant,
                accuracy: mean(|r| r.accuracy),
                precision: mean(|r| r.precision),
                recall: mean(|r| r.recall),
                f1: mean(|r| r.f1),
                seeds: reports.len(),
            }
        })
        .collect()
}

/// One TSV with a row per (seed, variant) followed by the seed-mean rows.
pub fn ablation_tsv(seeds: &[u64], tables: &[AblationTable]) -> String {
    let mut out = String::from("seed\tvariant\taccuracy\tprecision\trecall\tf1\tbest_epoch\n");
    for (seed, t) in seeds.iter().zip(tables) {
        for r in &t.rows {
            out.push_str(&format!(
                "{seed}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\n",
                r.variant, r.report.accuracy, r.report.precision, r.report.recall, r.report.f1, r.best_epoch
            ));
        }
    }
    for m in ablation_means(tables) {
        out.push_str(&format!(
            "mean\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t\n",
            m.variant, m.accuracy, m.precision, m.recall, m.f1
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lexicon: String,
    pub num_topics: usize,
    pub valid_f1: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Index of the row with the highest validation F1 (first on ties).
    pub best: usize,
}

impl SweepResult {
    pub fn best_row(&self) -> &SweepRow {
        &self.rows[self.best]
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lexicon\tnum_topics\tvalid_f1\tbest_epoch\n");
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\t{:.4}\t{}\n", r.lexicon, r.num_topics, r.valid_f1, r.best_epoch));
        }
        out
    }
}

fn lexicon_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Trains one model per (lexicon, topic count) pair and reports validation F1.
///
/// The topic model is fitted once per topic count and shared across lexicons.
/// With no lexicon files the configured lexicon (or none) is the only one.
pub fn sweep<T: Scalar>(cfg: &TrainConfig, corpus: &Corpus, lexicons: &[PathBuf], topic_counts: &[usize]) -> Result<SweepResult> {
    cfg.validate()?;
    if topic_counts.is_empty() {
        return Err(Error::Config("sweep needs at least one topic count".into()));
    }
    let lexicons: Vec<Lexicon> = if lexicons.is_empty() {
        vec![lexicon_for(cfg)?]
    } else {
        lexicons
            .iter()
            .map(|p| {
                let mut lex = load_lexicon(p)?;
                lex.name = lexicon_name(p);
                Ok(lex)
            })
            .collect::<Result<_>>()?
    };
    let train = documents(&corpus.train, cfg.level)?;
    let valid = documents(&corpus.valid, cfg.level)?;
    let base = Features::fit(&train, Lexicon::new("none"), &TrainConfig {
        num_topics: topic_counts[0],
        ..cfg.clone()
    })?;
    let mut rows = Vec::new();
    for &m in topic_counts {
        let run = TrainConfig {
            num_topics: m,
            ..cfg.clone()
        };
        run.validate()?;
        let mut features = if m == base.lda.num_topics {
            base.clone()
        } else {
            base.with_topics(&train, &run, m)?
        };
        let train_topics = features.topic_vectors(&train);
        let valid_topics = features.topic_vectors(&valid);
        for lex in &lexicons {
            features.lexicon = lex.clone();
            let data = Prepared {
                labels: corpus.labels.clone(),
                train: features.assemble(&train, &train_topics),
                valid: features.assemble(&valid, &valid_topics),
                test: Vec::new(),
                features: features.clone(),
            };
            let table = embedding_table::<T>(&run, &features.vocab)?;
            let trained = train_model(&run, &data, table)?;
            let f1 = trained.log.best().map_or(0.0, |e| e.valid_f1);
            log::info!("sweep lexicon `{}`, m = {m}: valid f1 {f1:.4}", lex.name);
            rows.push(SweepRow {
                lexicon: lex.name.clone(),
                num_topics: m,
                valid_f1: f1,
                best_epoch: trained.log.best_epoch,
            });
        }
    }
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.valid_f1 > rows[best].valid_f1 {
            best = i;
        }
    }
    Ok(SweepResult { rows, best })
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
