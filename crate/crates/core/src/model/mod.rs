//! The relation-network classifier and its ablation variants.

mod head;

pub use head::{classify, l2_penalty, predict, weighted_cross_entropy, ClassWeights, HeadNodes};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Matrix, NodeId, ParamStore};
use crate::corpus::{EmbeddingTable, EncodedDoc};
use crate::encoder::{bilstm, embed_steps, HiddenStates, LstmParams};
use crate::error::{Error, Result};
use crate::relation::{channel_forward, fuse, Channel, ChannelParams};
use crate::scalar::Scalar;

/// Name of the embedding parameter.
pub const EMBEDDING: &str = "emb";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Masked mean of the BiLSTM states.
    BilstmOnly,
    /// `[mean H, mean s, v]`: indicators concatenated, no relation module.
    Concat,
    RnSentiment,
    RnTopic,
    /// Both relation channels, fused.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::BilstmOnly,
        Variant::Concat,
        Variant::RnSentiment,
        Variant::RnTopic,
        Variant::Full,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::BilstmOnly => "bilstm_only",
            Variant::Concat => "concat",
            Variant::RnSentiment => "rn_sentiment",
            Variant::RnTopic => "rn_topic",
            Variant::Full => "full",
        }
    }

    pub fn uses(self, channel: Channel) -> bool {
        matches!(
            (self, channel),
            (Variant::Full, _) | (Variant::RnSentiment, Channel::Sentiment) | (Variant::RnTopic, Channel::Topic)
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected one of bilstm_only, concat, rn_sentiment, rn_topic, full)")))
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Padded sequence length l.
    pub max_len: usize,
    pub embed_dim: usize,
    /// LSTM units per direction, n.
    pub hidden: usize,
    /// Topic count m.
    pub num_topics: usize,
    /// Relation width k.
    pub relation_dim: usize,
    /// Head hidden width d_l.
    pub head_dim: usize,
    pub num_classes: usize,
    /// One attention (W, b) pair for both channels instead of one each.
    pub shared_attention: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("max_len", self.max_len),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("num_topics", self.num_topics),
            ("relation_dim", self.relation_dim),
            ("head_dim", self.head_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        Ok(())
    }

    /// Width of the representation fed to the head.
    pub fn fused_dim(&self) -> usize {
        let two_n = 2 * self.hidden;
        match self.variant {
            Variant::BilstmOnly => two_n,
            Variant::Concat => two_n + 1 + self.num_topics,
            Variant::RnSentiment | Variant::RnTopic => self.relation_dim,
            Variant::Full => 2 * self.relation_dim,
        }
    }

    pub(crate) fn channel(&self, channel: Channel) -> ChannelParams {
        let q = match channel {
            Channel::Sentiment => 1,
            Channel::Topic => self.num_topics,
        };
        ChannelParams::new(channel, 2 * self.hidden, q, self.relation_dim, self.max_len, self.shared_attention)
    }

    pub(crate) fn lstm(&self) -> (LstmParams, LstmParams) {
        (
            LstmParams::new("lstm_f", self.embed_dim, self.hidden),
            LstmParams::new("lstm_b", self.embed_dim, self.hidden),
        )
    }
}

/// One model input: an encoded document with its two indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub doc: EncodedDoc,
    /// Per-token sentiment scores, length l, zero on padding.
    pub sentiment: Vec<f64>,
    /// Topic distribution, length m.
    pub topics: Vec<f64>,
    pub label: Option<usize>,
}

/// Graph handles of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: NodeId,
    pub probs: NodeId,
    pub alpha_sentiment: Option<NodeId>,
    pub alpha_topic: Option<NodeId>,
    pub hidden: HiddenStates,
    pub lengths: Vec<usize>,
}

/// Per-document output of [`RnModel::predict`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f64>,
    /// Attention weights over the real tokens only; padded positions carry exactly zero weight.
    pub alpha_sentiment: Option<Vec<f64>>,
    pub alpha_topic: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RnModel<T: Scalar> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
}

impl<T: Scalar> RnModel<T> {
    /// Initializes every parameter of `config.variant` from `seed`. The
    /// embedding table is taken as given; its `trainable` flag selects
    /// dynamic or static embeddings.
    pub fn build(config: ModelConfig, embeddings: EmbeddingTable<T>, seed: u64) -> Result<Self> {
        config.validate()?;
        if embeddings.dim() != config.embed_dim {
            return Err(Error::Config(format!(
                "embedding table has dimension {}, config says {}",
                embeddings.dim(),
                config.embed_dim
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        params.insert(EMBEDDING, embeddings.matrix, embeddings.trainable, true)?;
        let (fwd, bwd) = config.lstm();
        fwd.init(&mut params, &mut rng)?;
        bwd.init(&mut params, &mut rng)?;
        for channel in [Channel::Sentiment, Channel::Topic] {
            if config.variant.uses(channel) {
                config.channel(channel).init(&mut params, &mut rng)?;
            }
        }
        head::init_head(&mut params, config.fused_dim(), config.head_dim, config.num_classes, &mut rng)?;
        Ok(RnModel { config, params })
    }

    pub fn vocab_size(&self) -> usize {
        self.params.value(EMBEDDING).map_or(0, |m| m.rows())
    }

    fn check_batch(&self, batch: &[&Example]) -> Result<Vec<usize>> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let c = &self.config;
        let mut lengths = Vec::with_capacity(batch.len());
        for ex in batch {
            if ex.doc.max_len() != c.max_len || ex.sentiment.len() != c.max_len {
                return Err(Error::Data(format!(
                    "example `{}` has length {} (sentiment {}), model expects {}",
                    ex.id,
                    ex.doc.max_len(),
                    ex.sentiment.len(),
                    c.max_len
                )));
            }
            if ex.topics.len() != c.num_topics {
                return Err(Error::Data(format!(
                    "example `{}` has {} topic weights, model expects {}",
                    ex.id,
                    ex.topics.len(),
                    c.num_topics
                )));
            }
            if ex.doc.is_empty() {
                return Err(Error::Data(format!("example `{}` has no tokens", ex.id)));
            }
            lengths.push(ex.doc.len());
        }
        Ok(lengths)
    }

    /// Builds the forward pass of a batch on `g`.
    pub fn forward(&self, g: &mut Graph<T>, batch: &[&Example]) -> Result<Forward> {
        let lengths = self.check_batch(batch)?;
        let c = &self.config;
        let batch_size = batch.len();
        let table = g.param(&self.params, EMBEDDING)?;
        let docs: Vec<&EncodedDoc> = batch.iter().map(|e| &e.doc).collect();
        let xs = embed_steps(g, table, &docs)?;
        let (fp, bp) = c.lstm();
        let fwd = fp.bind(g, &self.params)?;
        let bwd = bp.bind(g, &self.params)?;
        let hs = bilstm(g, &xs, &lengths, &fwd, &bwd)?;

        let mut alpha_sentiment = None;
        let mut alpha_topic = None;
        let e = match c.variant {
            Variant::BilstmOnly => mean_pool(g, &hs, &lengths)?,
            Variant::Concat => {
                let pooled = mean_pool(g, &hs, &lengths)?;
                let mean_s = g.constant(Matrix::from_fn(batch_size, 1, |b, _| {
                    let n = lengths[b];
                    T::lit(batch[b].sentiment[..n].iter().sum::<f64>() / n as f64)
                }));
                let v = g.constant(Matrix::from_fn(batch_size, c.num_topics, |b, j| T::lit(batch[b].topics[j])));
                g.concat_cols(&[pooled, mean_s, v])?
            }
            _ => {
                let mut pooled = Vec::new();
                for channel in [Channel::Sentiment, Channel::Topic] {
                    if !c.variant.uses(channel) {
                        continue;
                    }
                    let nodes = c.channel(channel).bind(g, &self.params)?;
                    let indicator: Vec<NodeId> = match channel {
                        Channel::Sentiment => (0..c.max_len)
                            .map(|t| g.constant(Matrix::from_fn(batch_size, 1, |b, _| T::lit(batch[b].sentiment[t]))))
                            .collect(),
                        Channel::Topic => {
                            let v = g.constant(Matrix::from_fn(batch_size, c.num_topics, |b, j| T::lit(batch[b].topics[j])));
                            vec![v; c.max_len]
                        }
                    };
                    let out = channel_forward(g, &hs, &indicator, &lengths, &nodes)?;
                    match channel {
                        Channel::Sentiment => alpha_sentiment = Some(out.alpha),
                        Channel::Topic => alpha_topic = Some(out.alpha),
                    }
                    pooled.push(out.pooled);
                }
                match pooled[..] {
                    [one] => one,
                    [s, v] => fuse(g, s, v)?,
                    _ => unreachable!("relation variants use one or two channels"),
                }
            }
        };
        let head = head::bind_head(g, &self.params)?;
        let (logits, probs) = classify(g, e, &head)?;
        Ok(Forward {
            logits,
            probs,
            alpha_sentiment,
            alpha_topic,
            hidden: hs,
            lengths,
        })
    }

    /// Training objective of a labeled batch: weighted cross-entropy plus
    /// `lambda · ‖θ‖²` (or `lambda · ‖θ‖` when `squared` is false).
    pub fn loss(
        &self,
        g: &mut Graph<T>,
        batch: &[&Example],
        weights: &ClassWeights,
        lambda: f64,
        squared: bool,
    ) -> Result<(NodeId, Forward)> {
        let labels = batch
            .iter()
            .map(|e| e.label.ok_or_else(|| Error::Data(format!("example `{}` has no label", e.id))))
            .collect::<Result<Vec<_>>>()?;
        let fwd = self.forward(g, batch)?;
        let ce = weighted_cross_entropy(g, fwd.probs, &labels, weights)?;
        let total = if lambda > 0.0 {
            match l2_penalty(g, &self.params, squared)? {
                Some(p) => {
                    let p = g.scale(p, T::lit(lambda));
                    g.add(ce, p)?
                }
                None => ce,
            }
        } else {
            ce
        };
        Ok((total, fwd))
    }

    /// Class probabilities, argmax labels and attention weights of a batch.
    pub fn predict(&self, batch: &[&Example]) -> Result<Vec<Prediction>> {
        let mut g = Graph::new();
        let fwd = self.forward(&mut g, batch)?;
        let probs = g.value(fwd.probs);
        let alpha = |id: Option<NodeId>, b: usize| {
            id.map(|id| {
                let a = g.value(id);
                (0..fwd.lengths[b]).map(|t| a[(b, t)].as_f64()).collect()
            })
        };
        Ok((0..batch.len())
            .map(|b| {
                let p: Vec<f64> = probs.row(b).iter().map(|x| x.as_f64()).collect();
                Prediction {
                    label: predict(&p),
                    alpha_sentiment: alpha(fwd.alpha_sentiment, b),
                    alpha_topic: alpha(fwd.alpha_topic, b),
                    probs: p,
                }
            })
            .collect())
    }

    /// [`predict`](Self::predict) over a whole dataset in chunks of `batch_size`.
    pub fn predict_all(&self, examples: &[Example], batch_size: usize) -> Result<Vec<Prediction>> {
        let mut out = Vec::with_capacity(examples.len());
        for chunk in examples.chunks(batch_size.max(1)) {
            let refs: Vec<&Example> = chunk.iter().collect();
            out.extend(self.predict(&refs)?);
        }
        Ok(out)
    }
}

/// Masked mean of the hidden states: row b is `Σ_t H_b[t] / len_b` (padded rows are already zero).
fn mean_pool<T: Scalar>(g: &mut Graph<T>, hs: &HiddenStates, lengths: &[usize]) -> Result<NodeId> {
    let longest = lengths.iter().copied().max().unwrap_or(0).min(hs.steps.len());
    let mut sum = hs.steps[0];
    for &h in &hs.steps[1..longest] {
        sum = g.add(sum, h)?;
    }
    let inv = g.constant(Matrix::from_fn(lengths.len(), 1, |b, _| T::lit(1.0 / lengths[b] as f64)));
    g.row_scale(sum, inv)
}
