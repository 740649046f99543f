use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::model::{Example, Prediction};

use super::data::Document;
use super::metrics::EvalReport;

/// One line of prediction output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub label: String,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    #[serde(default)]
    pub alpha_s: Option<Vec<f64>>,
    #[serde(default)]
    pub alpha_v: Option<Vec<f64>>,
}

impl PredictionRecord {
    pub fn new(example: &Example, prediction: &Prediction, labels: &[String]) -> Self {
        PredictionRecord {
            id: example.id.clone(),
            label: labels[prediction.label].clone(),
            p: prediction.probs.clone(),
            alpha_s: prediction.alpha_sentiment.clone(),
            alpha_v: prediction.alpha_topic.clone(),
        }
    }
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Scores saved predictions against labeled documents, matched by id.
pub fn evaluate_predictions(gold: &[Document], predictions: &[PredictionRecord], labels: &[String]) -> Result<EvalReport> {
    let by_id: HashMap<&str, &PredictionRecord> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut truth = Vec::with_capacity(gold.len());
    let mut predicted = Vec::with_capacity(gold.len());
    for d in gold {
        let y = d.label.ok_or_else(|| Error::Data(format!("gold document `{}` has no label", d.id)))?;
        let p = by_id
            .get(d.id.as_str())
            .ok_or_else(|| Error::Data(format!("no prediction for `{}`", d.id)))?;
        let yhat = labels
            .iter()
            .position(|l| *l == p.label)
            .ok_or_else(|| Error::Data(format!("predicted label `{}` not in label list", p.label)))?;
        truth.push(y);
        predicted.push(yhat);
    }
    EvalReport::from_predictions(&truth, &predicted, labels)
}

/// Attention weights of one document next to its tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub id: String,
    pub tokens: Vec<String>,
    pub alpha_s: Option<Vec<f64>>,
    pub alpha_v: Option<Vec<f64>>,
}

pub fn attention_records(examples: &[Example], predictions: &[Prediction], vocab: &Vocab) -> Vec<AttentionRecord> {
    examples
        .iter()
        .zip(predictions)
        .map(|(e, p)| AttentionRecord {
            id: e.id.clone(),
            tokens: e.doc.ids[..e.doc.len()]
                .iter()
                .map(|&i| vocab.token(i).unwrap_or("<unk>").to_string())
                .collect(),
            alpha_s: p.alpha_sentiment.clone(),
            alpha_v: p.alpha_topic.clone(),
        })
        .collect()
}
