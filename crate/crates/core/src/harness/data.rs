use std::collections::HashMap;

use crate::corpus::{encode, group_users, load_jsonl, user_tokens, Post, SyntheticCorpus, UserRecord, Vocab};
use crate::error::{Error, Result};
use crate::indicators::{lda_fit, load_lexicon, sentiment_vector, LdaConfig, LdaModel, Lexicon};
use crate::model::Example;

use super::config::{Level, TrainConfig};

/// Train/valid/test posts with their label list.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub labels: Vec<String>,
    pub train: Vec<Post>,
    pub valid: Vec<Post>,
    pub test: Vec<Post>,
}

impl Corpus {
    /// Reads the JSON-lines files named by `cfg`. Only the training file is required.
    pub fn load(cfg: &TrainConfig) -> Result<Self> {
        let train = cfg
            .train
            .as_ref()
            .ok_or_else(|| Error::Config("no training file given (`train`)".into()))?;
        let read = |p: &Option<std::path::PathBuf>| p.as_ref().map_or(Ok(Vec::new()), |p| load_jsonl(p, &cfg.labels));
        Ok(Corpus {
            labels: cfg.labels.clone(),
            train: load_jsonl(train, &cfg.labels)?,
            valid: read(&cfg.valid)?,
            test: read(&cfg.test)?,
        })
    }

    pub fn from_synthetic(s: &SyntheticCorpus) -> Self {
        Corpus {
            labels: s.labels.clone(),
            train: s.train.clone(),
            valid: s.valid.clone(),
            test: s.test.clone(),
        }
    }
}

/// A unit of classification: one post, or one user's concatenated posts.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: Option<usize>,
}

/// Documents at the requested level. Users whose posts carry no label at all
/// become unlabeled documents; conflicting labels are an error.
pub fn documents(posts: &[Post], level: Level) -> Result<Vec<Document>> {
    let docs: Vec<Document> = match level {
        Level::Post => posts
            .iter()
            .map(|p| Document {
                id: p.id.clone(),
                tokens: p.tokens.clone(),
                label: p.label,
            })
            .collect(),
        Level::User if posts.iter().all(|p| p.label.is_none()) => {
            let mut order: Vec<String> = Vec::new();
            let mut groups: HashMap<String, Vec<Post>> = HashMap::new();
            for p in posts {
                let user = p
                    .user
                    .clone()
                    .ok_or_else(|| Error::Data(format!("post `{}` has no user id", p.id)))?;
                if !groups.contains_key(&user) {
                    order.push(user.clone());
                }
                groups.entry(user).or_default().push(p.clone());
            }
            order
                .into_iter()
                .map(|user| {
                    let record = UserRecord {
                        posts: groups.remove(&user).unwrap_or_default(),
                        user,
                        label: 0,
                    };
                    Document {
                        tokens: user_tokens(&record),
                        id: record.user,
                        label: None,
                    }
                })
                .collect()
        }
        Level::User => group_users(posts)?
            .iter()
            .map(|r| Document {
                id: r.user.clone(),
                tokens: user_tokens(r),
                label: Some(r.label),
            })
            .collect(),
    };
    if let Some(d) = docs.iter().find(|d| d.tokens.is_empty()) {
        return Err(Error::Data(format!("document `{}` has no tokens", d.id)));
    }
    Ok(docs)
}

/// The lexicon named by `cfg.lexicon`, or an empty one (all scores 0).
pub fn lexicon_for(cfg: &TrainConfig) -> Result<Lexicon> {
    match &cfg.lexicon {
        Some(p) => load_lexicon(p),
        None => {
            log::warn!("no lexicon configured; sentiment scores are all zero");
            Ok(Lexicon::new("empty"))
        }
    }
}

/// Phase-one state: vocabulary, fitted topic model and lexicon, i.e.
/// everything needed to turn a document into an [`Example`].
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub vocab: Vocab,
    pub lda: LdaModel,
    pub lexicon: Lexicon,
    pub max_len: usize,
    pub infer_iters: usize,
    pub seed: u64,
}

impl Features {
    /// Builds the vocabulary from `train` and fits the topic model on it.
    pub fn fit(train: &[Document], lexicon: Lexicon, cfg: &TrainConfig) -> Result<Self> {
        let vocab = Vocab::build(train.iter().map(|d| &d.tokens), cfg.min_count)?;
        Self::fit_topics(vocab, train, lexicon, cfg, cfg.lda_config())
    }

    fn fit_topics(vocab: Vocab, train: &[Document], lexicon: Lexicon, cfg: &TrainConfig, lda: LdaConfig) -> Result<Self> {
        let ids: Vec<Vec<usize>> = train.iter().map(|d| ids_of(&vocab, &d.tokens)).collect();
        let lda = lda_fit(&ids, &vocab, lda)?;
        Ok(Features {
            vocab,
            lda,
            lexicon,
            max_len: cfg.max_len(),
            infer_iters: cfg.lda_infer_iters,
            seed: cfg.seed,
        })
    }

    /// Refits the topic model with `m` topics on the same vocabulary.
    pub fn with_topics(&self, train: &[Document], cfg: &TrainConfig, m: usize) -> Result<Self> {
        let mut lda = cfg.lda_config();
        lda.num_topics = m;
        Self::fit_topics(self.vocab.clone(), train, self.lexicon.clone(), cfg, lda)
    }

    /// Topic vectors of full (untruncated) documents. Documents without a
    /// usable token get the uniform vector.
    pub fn topic_vectors(&self, docs: &[Document]) -> Vec<Vec<f64>> {
        let mut degenerate = 0;
        let out = docs
            .iter()
            .map(|d| {
                let tv = self.lda.infer_doc(&ids_of(&self.vocab, &d.tokens), self.infer_iters, self.seed);
                degenerate += tv.degenerate as usize;
                tv.v
            })
            .collect();
        if degenerate > 0 {
            log::warn!("{degenerate} documents had no usable topic tokens; their topic vectors are uniform");
        }
        out
    }

    /// Encodes `docs` with precomputed topic vectors.
    pub fn assemble(&self, docs: &[Document], topics: &[Vec<f64>]) -> Vec<Example> {
        docs.iter()
            .zip(topics)
            .map(|(d, v)| {
                let mut doc = encode(&d.tokens, &self.vocab, self.max_len);
                doc.label = d.label;
                Example {
                    id: d.id.clone(),
                    sentiment: sentiment_vector(&doc, &d.tokens, &self.lexicon),
                    doc,
                    topics: v.clone(),
                    label: d.label,
                }
            })
            .collect()
    }

    pub fn examples(&self, docs: &[Document]) -> Vec<Example> {
        self.assemble(docs, &self.topic_vectors(docs))
    }
}

fn ids_of(vocab: &Vocab, tokens: &[String]) -> Vec<usize> {
    tokens.iter().map(|t| vocab.id(t)).collect()
}

/// Model-ready splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub labels: Vec<String>,
    pub features: Features,
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
    pub test: Vec<Example>,
}

/// Phase one: vocabulary and topic model from the training split, then
/// indicators for every split.
pub fn prepare(cfg: &TrainConfig, corpus: &Corpus, lexicon: Lexicon) -> Result<Prepared> {
    let train = documents(&corpus.train, cfg.level)?;
    if let Some(d) = train.iter().find(|d| d.label.is_none()) {
        return Err(Error::Data(format!("training document `{}` has no label", d.id)));
    }
    let valid = documents(&corpus.valid, cfg.level)?;
    let test = documents(&corpus.test, cfg.level)?;
    let features = Features::fit(&train, lexicon, cfg)?;
    log::info!(
        "vocabulary {} tokens, {} topics, lexicon `{}` ({} entries)",
        features.vocab.len(),
        features.lda.num_topics,
        features.lexicon.name,
        features.lexicon.len()
    );
    Ok(Prepared {
        labels: corpus.labels.clone(),
        train: features.examples(&train),
        valid: features.examples(&valid),
        test: features.examples(&test),
        features,
    })
}
