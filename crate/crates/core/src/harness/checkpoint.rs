use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::indicators::{LdaModel, Lexicon};
use crate::model::RnModel;
use crate::scalar::Scalar;

use super::config::TrainConfig;
use super::data::Features;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to classify new text: the run configuration, the
/// phase-one indicator state and the trained parameters with their Adam state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Checkpoint<T: Scalar> {
    pub version: u32,
    /// `f32` or `f64`.
    pub precision: String,
    pub config: TrainConfig,
    pub labels: Vec<String>,
    pub vocab_hash: String,
    pub vocab: Vocab,
    pub lda: LdaModel,
    pub lexicon_name: String,
    pub lexicon: Vec<(String, f64)>,
    pub best_epoch: usize,
    pub model: RnModel<T>,
}

#[derive(Deserialize)]
struct Header {
    version: u32,
    precision: String,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(config: &TrainConfig, labels: &[String], features: &Features, model: RnModel<T>, best_epoch: usize) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            precision: T::NAME.to_string(),
            config: config.clone(),
            labels: labels.to_vec(),
            vocab_hash: features.vocab.hash(),
            vocab: features.vocab.clone(),
            lda: features.lda.clone(),
            lexicon_name: features.lexicon.name.clone(),
            lexicon: features
                .lexicon
                .entries()
                .into_iter()
                .map(|(t, s)| (t.to_string(), s))
                .collect(),
            best_epoch,
            model,
        }
    }

    /// Rebuilds the indicator pipeline the model was trained with.
    pub fn features(&self) -> Result<Features> {
        Ok(Features {
            vocab: self.vocab.clone(),
            lda: self.lda.clone(),
            lexicon: Lexicon::from_pairs(self.lexicon_name.clone(), self.lexicon.iter().map(|(t, s)| (t.as_str(), *s)))?,
            max_len: self.config.max_len(),
            infer_iters: self.config.lda_infer_iters,
            seed: self.config.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let header: Header = serde_json::from_slice(&bytes)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "{}: checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                path.display(),
                header.version
            )));
        }
        if header.precision != T::NAME {
            return Err(Error::Config(format!(
                "{}: checkpoint holds {} parameters, requested {}",
                path.display(),
                header.precision,
                T::NAME
            )));
        }
        let ck: Checkpoint<T> = serde_json::from_slice(&bytes)?;
        if ck.vocab.hash() != ck.vocab_hash || ck.lda.vocab_hash != ck.vocab_hash {
            return Err(Error::Data(format!("{}: vocabulary hash mismatch", path.display())));
        }
        if ck.model.vocab_size() != ck.vocab.len() {
            return Err(Error::Data(format!(
                "{}: embedding table has {} rows for a vocabulary of {}",
                path.display(),
                ck.model.vocab_size(),
                ck.vocab.len()
            )));
        }
        Ok(ck)
    }
}

/// Precision tag of a saved checkpoint, read without loading its parameters as a given type.
pub fn checkpoint_precision(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_slice(&bytes)?;
    Ok(header.precision)
}
