use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::LdaConfig;
use crate::model::{ModelConfig, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// One document per post.
    Post,
    /// One document per user: that user's posts concatenated.
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Inverse class frequency, normalized to mean 1.
    Inverse,
    Uniform,
}

/// Everything a training run needs. Read from a flat `key = value` file;
/// command-line flags are applied afterwards with [`TrainConfig::set`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub labels: Vec<String>,
    pub level: Level,
    pub variant: Variant,
    /// Padded length l; `None` means 64 for posts, 512 for users.
    pub max_len: Option<usize>,
    pub embed_dim: usize,
    /// n; `None` means 64 for posts, 128 for users.
    pub hidden: Option<usize>,
    pub relation_dim: usize,
    /// d_l; `None` means equal to the relation width.
    pub head_dim: Option<usize>,
    pub num_topics: usize,
    /// `None` means 128 for posts, 16 for users.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub lambda: f64,
    /// Penalize ‖θ‖² rather than ‖θ‖.
    pub l2_squared: bool,
    pub clip: f64,
    pub seed: u64,
    pub min_count: usize,
    pub lexicon: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub static_embeddings: bool,
    pub shared_attention: bool,
    pub class_weights: Weighting,
    pub precision: Precision,
    pub lda_alpha: Option<f64>,
    pub lda_beta: f64,
    pub lda_iters: usize,
    pub lda_infer_iters: usize,
    pub lda_stopwords: usize,
    /// Directory of lexicon files enumerated by the sweep.
    pub sweep_lexicons: Option<PathBuf>,
    pub sweep_topics: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            train: None,
            valid: None,
            test: None,
            labels: Vec::new(),
            level: Level::Post,
            variant: Variant::Full,
            max_len: None,
            embed_dim: 100,
            hidden: None,
            relation_dim: 64,
            head_dim: None,
            num_topics: 10,
            batch_size: None,
            epochs: 50,
            lr: 1e-3,
            lambda: 1e-4,
            l2_squared: true,
            clip: 5.0,
            seed: 0,
            min_count: 1,
            lexicon: None,
            embeddings: None,
            static_embeddings: false,
            shared_attention: false,
            class_weights: Weighting::Inverse,
            precision: Precision::F64,
            lda_alpha: None,
            lda_beta: 0.01,
            lda_iters: 500,
            lda_infer_iters: 50,
            lda_stopwords: 100,
            sweep_lexicons: None,
            sweep_topics: (5..=20).collect(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// `a..b` or `a..=b` ranges and comma lists.
fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = value.split_once("..=") {
        return Ok((parse(key, a.trim())?..=parse(key, b.trim())?).collect());
    }
    if let Some((a, b)) = value.split_once("..") {
        return Ok((parse(key, a.trim())?..parse(key, b.trim())?).collect());
    }
    parse_list(key, value)
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" || value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn path(value: &str, base: Option<&Path>) -> Option<PathBuf> {
    if value.is_empty() {
        return None;
    }
    let p = PathBuf::from(value);
    Some(match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    })
}

impl TrainConfig {
    /// Desk-scale settings for the synthetic interaction corpus: narrow
    /// layers, a wide head, 15 epochs and three topics with a sparse prior.
    pub fn synthetic(labels: Vec<String>) -> Self {
        TrainConfig {
            labels,
            max_len: Some(40),
            embed_dim: 16,
            hidden: Some(16),
            relation_dim: 16,
            head_dim: Some(64),
            num_topics: 3,
            batch_size: Some(32),
            epochs: 15,
            lr: 2e-3,
            lda_alpha: Some(0.5),
            lda_iters: 200,
            sweep_topics: vec![2, 3, 4, 5],
            ..TrainConfig::default()
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against the directory of `file`.
    pub fn from_file(file: &Path) -> Result<Self> {
        let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        let base = file.parent();
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("{}:{}: expected `key = value`", file.display(), i + 1)));
            };
            cfg.set_relative(key.trim(), value.trim(), base)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", file.display(), i + 1)))?;
        }
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_relative(key, value, None)
    }

    fn set_relative(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        match key {
            "train" => self.train = path(value, base),
            "valid" => self.valid = path(value, base),
            "test" => self.test = path(value, base),
            "lexicon" => self.lexicon = path(value, base),
            "embeddings" => self.embeddings = path(value, base),
            "sweep_lexicons" => self.sweep_lexicons = path(value, base),
            "labels" => self.labels = parse_list(key, value)?,
            "level" => {
                self.level = match value {
                    "post" => Level::Post,
                    "user" => Level::User,
                    _ => return Err(Error::Config(format!("level must be post or user, got `{value}`"))),
                }
            }
            "variant" => self.variant = value.parse()?,
            "max_len" => self.max_len = optional(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "hidden" => self.hidden = optional(key, value)?,
            "relation_dim" => self.relation_dim = parse(key, value)?,
            "head_dim" => self.head_dim = optional(key, value)?,
            "num_topics" => self.num_topics = parse(key, value)?,
            "batch_size" => self.batch_size = optional(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "l2_squared" => self.l2_squared = parse_bool(key, value)?,
            "clip" => self.clip = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "static_embeddings" => self.static_embeddings = parse_bool(key, value)?,
            "shared_attention" => self.shared_attention = parse_bool(key, value)?,
            "class_weights" => {
                self.class_weights = match value {
                    "inverse" => Weighting::Inverse,
                    "uniform" => Weighting::Uniform,
                    _ => return Err(Error::Config(format!("class_weights must be inverse or uniform, got `{value}`"))),
                }
            }
            "precision" => {
                self.precision = match value {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(Error::Config(format!("precision must be f32 or f64, got `{value}`"))),
                }
            }
            "lda_alpha" => self.lda_alpha = optional(key, value)?,
            "lda_beta" => self.lda_beta = parse(key, value)?,
            "lda_iters" => self.lda_iters = parse(key, value)?,
            "lda_infer_iters" => self.lda_infer_iters = parse(key, value)?,
            "lda_stopwords" => self.lda_stopwords = parse(key, value)?,
            "sweep_topics" => self.sweep_topics = parse_usize_list(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn max_len(&self) -> usize {
        self.max_len.unwrap_or(match self.level {
            Level::Post => 64,
            Level::User => 512,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden.unwrap_or(match self.level {
            Level::Post => 64,
            Level::User => 128,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size.unwrap_or(match self.level {
            Level::Post => 128,
            Level::User => 16,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size() == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.clip > 0.0) {
            return Err(Error::Config(format!("clip must be positive, got {}", self.clip)));
        }
        if self.labels.len() < 2 {
            return Err(Error::Config("at least two labels must be declared".into()));
        }
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        if self.num_topics < 2 {
            return Err(Error::Config("num_topics must be at least 2".into()));
        }
        self.model_config().validate()
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            max_len: self.max_len(),
            embed_dim: self.embed_dim,
            hidden: self.hidden(),
            num_topics: self.num_topics,
            relation_dim: self.relation_dim,
            head_dim: self.head_dim.unwrap_or(self.relation_dim),
            num_classes: self.labels.len(),
            shared_attention: self.shared_attention,
        }
    }

    pub fn lda_config(&self) -> LdaConfig {
        LdaConfig {
            num_topics: self.num_topics,
            alpha: self.lda_alpha,
            beta: self.lda_beta,
            iters: self.lda_iters,
            infer_iters: self.lda_infer_iters,
            stopwords: self.lda_stopwords,
            seed: self.seed,
        }
    }

    /// Flat `key = value` text that [`from_file`](Self::from_file) reads back.
    pub fn to_file_string(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map_or("auto".into(), T::to_string)
        }
        fn p(v: &Option<PathBuf>) -> String {
            v.as_ref().map_or(String::new(), |p| p.display().to_string())
        }
        let join = |xs: &[usize]| xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let lines = [
            ("train", p(&self.train)),
            ("valid", p(&self.valid)),
            ("test", p(&self.test)),
            ("labels", self.labels.join(",")),
            ("level", if self.level == Level::Post { "post" } else { "user" }.into()),
            ("variant", self.variant.tag().into()),
            ("max_len", opt(&self.max_len)),
            ("embed_dim", self.embed_dim.to_string()),
            ("hidden", opt(&self.hidden)),
            ("relation_dim", self.relation_dim.to_string()),
            ("head_dim", opt(&self.head_dim)),
            ("num_topics", self.num_topics.to_string()),
            ("batch_size", opt(&self.batch_size)),
            ("epochs", self.epochs.to_string()),
            ("lr", self.lr.to_string()),
            ("lambda", self.lambda.to_string()),
            ("l2_squared", self.l2_squared.to_string()),
            ("clip", self.clip.to_string()),
            ("seed", self.seed.to_string()),
            ("min_count", self.min_count.to_string()),
            ("lexicon", p(&self.lexicon)),
            ("embeddings", p(&self.embeddings)),
            ("static_embeddings", self.static_embeddings.to_string()),
            ("shared_attention", self.shared_attention.to_string()),
            (
                "class_weights",
                if self.class_weights == Weighting::Inverse { "inverse" } else { "uniform" }.into(),
            ),
            ("precision", if self.precision == Precision::F64 { "f64" } else { "f32" }.into()),
            ("lda_alpha", opt(&self.lda_alpha)),
            ("lda_beta", self.lda_beta.to_string()),
            ("lda_iters", self.lda_iters.to_string()),
            ("lda_infer_iters", self.lda_infer_iters.to_string()),
            ("lda_stopwords", self.lda_stopwords.to_string()),
            ("sweep_lexicons", p(&self.sweep_lexicons)),
            ("sweep_topics", join(&self.sweep_topics)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
