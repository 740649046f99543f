//! Attentive relation channels.
//!
//! For every token position i a relation vector `r_i = g(h_i ‖ x_i)` is
//! computed by a two-layer ReLU MLP, where `h_i` is the BiLSTM state and
//! `x_i` the expanded risk indicator at that position (the token's sentiment
//! score, or the document's topic vector repeated on every row). Attention
//! logits `r_i·wᵀ + b_i` are masked and softmax-normalized over positions,
//! and the channel output is the attention-weighted sum `Σ_i α_i r_i`.
//!
//! Applying `g` to every (hidden state, indicator) pair and summing is the
//! relation-network form; the attention weights replace the uniform sum.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Matrix, NodeId, ParamStore};
use crate::encoder::HiddenStates;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Logit offset applied to padded positions before the softmax.
pub const MASK_LOGIT: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Sentiment,
    Topic,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Sentiment => "sentiment",
            Channel::Topic => "topic",
        }
    }
}

/// A risk indicator before expansion to l rows.
#[derive(Debug, Clone, Copy)]
pub enum Indicator<'a> {
    /// Per-token scores `s`, length l.
    Sentiment(&'a [f64]),
    /// Document topic vector `v`, length m.
    Topic(&'a [f64]),
}

/// l×1 column of per-token scores, or `v` repeated on each of l rows.
pub fn expand_indicator<T: Scalar>(ind: Indicator<'_>, l: usize) -> Matrix<T> {
    match ind {
        Indicator::Sentiment(s) => Matrix::from_fn(l, 1, |i, _| T::lit(s.get(i).copied().unwrap_or(0.0))),
        Indicator::Topic(v) => Matrix::from_fn(l, v.len(), |_, j| T::lit(v[j])),
    }
}

/// Shapes and parameter names of one relation channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub channel: Channel,
    pub prefix: String,
    /// Prefix of the attention parameters; equal for both channels when attention is shared.
    pub attention_prefix: String,
    /// 2n + 1 for sentiment, 2n + m for topics.
    pub in_dim: usize,
    pub k: usize,
    pub max_len: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ChannelNodes {
    pub channel: Channel,
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
    /// Attention weights, transposed to k×1.
    pub att_w: NodeId,
    /// Positional attention bias, 1×l.
    pub att_b: NodeId,
    pub in_dim: usize,
}

impl ChannelParams {
    pub fn new(channel: Channel, hidden2: usize, indicator_dim: usize, k: usize, max_len: usize, shared_attention: bool) -> Self {
        let prefix = match channel {
            Channel::Sentiment => "rel_s",
            Channel::Topic => "rel_v",
        };
        ChannelParams {
            channel,
            prefix: prefix.to_string(),
            attention_prefix: if shared_attention { "att".into() } else { format!("{prefix}.att") },
            in_dim: hidden2 + indicator_dim,
            k,
            max_len,
        }
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{}", self.prefix, part)
    }

    fn att_name(&self, part: &str) -> String {
        format!("{}.{}", self.attention_prefix, part)
    }

    /// Dense weights U(−1/√fan_in, 1/√fan_in); biases zero. Shared attention
    /// parameters are created once.
    pub fn init<T: Scalar>(&self, store: &mut ParamStore<T>, rng: &mut impl Rng) -> Result<()> {
        let mut dense = |r: usize, c: usize| {
            let bound = 1.0 / (r as f64).sqrt();
            Matrix::from_fn(r, c, |_, _| T::lit(rng.gen_range(-bound..bound)))
        };
        let w1 = dense(self.in_dim, self.k);
        let w2 = dense(self.k, self.k);
        let att_w = dense(self.k, 1).transpose();
        store.insert(&self.name("w1"), w1, true, true)?;
        store.insert(&self.name("b1"), Matrix::zeros(1, self.k), true, false)?;
        store.insert(&self.name("w2"), w2, true, true)?;
        store.insert(&self.name("b2"), Matrix::zeros(1, self.k), true, false)?;
        if !store.contains(&self.att_name("w")) {
            store.insert(&self.att_name("w"), att_w, true, true)?;
            store.insert(&self.att_name("b"), Matrix::zeros(1, self.max_len), true, false)?;
        }
        Ok(())
    }

    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>) -> Result<ChannelNodes> {
        let w1 = g.param(store, &self.name("w1"))?;
        let b1 = g.param(store, &self.name("b1"))?;
        let w2 = g.param(store, &self.name("w2"))?;
        let b2 = g.param(store, &self.name("b2"))?;
        let w = g.param(store, &self.att_name("w"))?;
        let att_b = g.param(store, &self.att_name("b"))?;
        let expect = [
            (w1, (self.in_dim, self.k)),
            (w2, (self.k, self.k)),
            (w, (1, self.k)),
            (att_b, (1, self.max_len)),
        ];
        for (id, shape) in expect {
            if g.shape(id) != shape {
                return Err(Error::Shape {
                    op: "relation_params",
                    lhs: shape,
                    rhs: g.shape(id),
                });
            }
        }
        let att_w = g.transpose(w);
        Ok(ChannelNodes {
            channel: self.channel,
            w1,
            b1,
            w2,
            b2,
            att_w,
            att_b,
            in_dim: self.in_dim,
        })
    }

    /// Scalars owned by this channel alone (shared attention excluded when `count_attention` is false).
    pub fn num_scalars(&self, count_attention: bool) -> usize {
        let mlp = self.in_dim * self.k + self.k + self.k * self.k + self.k;
        mlp + if count_attention { self.k + self.max_len } else { 0 }
    }
}

/// Row-wise relation MLP: row i of the result is `g(h_i ‖ x_i)`.
///
/// `h` is r×2n and `expanded` r×q; rows are independent, so r may be the l
/// positions of one document or the B documents of a batch at one step.
pub fn relation_vectors<T: Scalar>(g: &mut Graph<T>, h: NodeId, expanded: NodeId, p: &ChannelNodes) -> Result<NodeId> {
    let (sh, se) = (g.shape(h), g.shape(expanded));
    if sh.0 != se.0 || sh.1 + se.1 != p.in_dim {
        return Err(Error::Contract(format!(
            "{} channel expects {} input columns, got hidden {:?} + indicator {:?}",
            p.channel.name(),
            p.in_dim,
            sh,
            se
        )));
    }
    let x = g.concat_cols(&[h, expanded])?;
    let hidden = g.affine(x, p.w1, p.b1)?;
    let hidden = g.relu(hidden);
    g.affine(hidden, p.w2, p.b2)
}

/// Masked attention over positions.
///
/// `relations[t]` is B×k (or `None` for a position that is padding in every
/// row). Returns α as B×l, exactly zero on padded positions.
pub fn attention<T: Scalar>(
    g: &mut Graph<T>,
    relations: &[Option<NodeId>],
    lengths: &[usize],
    p: &ChannelNodes,
) -> Result<NodeId> {
    if let Some(b) = lengths.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("document {b} of the batch has no tokens; attention is undefined")));
    }
    let batch = lengths.len();
    let l = relations.len();
    let filler = g.constant(Matrix::zeros(batch, 1));
    let mut cols = Vec::with_capacity(l);
    for r in relations {
        cols.push(match r {
            Some(r) => g.matmul(*r, p.att_w)?,
            None => filler,
        });
    }
    let logits = g.concat_cols(&cols)?;
    let logits = g.add_row(logits, p.att_b)?;
    let logits = if lengths.iter().all(|&n| n >= l) {
        logits
    } else {
        let offset = g.constant(Matrix::from_fn(batch, l, |b, t| {
            if t < lengths[b] {
                T::zero()
            } else {
                T::lit(MASK_LOGIT)
            }
        }));
        g.add(logits, offset)?
    };
    Ok(g.row_softmax(logits))
}

/// `Σ_t α[:, t] ⊙ relations[t]`, B×k.
pub fn attend_pool<T: Scalar>(g: &mut Graph<T>, alpha: NodeId, relations: &[Option<NodeId>]) -> Result<NodeId> {
    let (batch, l) = g.shape(alpha);
    if l != relations.len() {
        return Err(Error::Shape {
            op: "attend_pool",
            lhs: (batch, l),
            rhs: (relations.len(), 0),
        });
    }
    let mut acc: Option<NodeId> = None;
    for (t, r) in relations.iter().enumerate() {
        let Some(r) = *r else { continue };
        let a = g.slice_cols(alpha, t, t + 1)?;
        let term = g.row_scale(r, a)?;
        acc = Some(match acc {
            None => term,
            Some(prev) => g.add(prev, term)?,
        });
    }
    acc.ok_or_else(|| Error::Contract("attend_pool over zero positions".into()))
}

/// `e = [r̃_s, r̃_v]`, sentiment first.
pub fn fuse<T: Scalar>(g: &mut Graph<T>, sentiment: NodeId, topic: NodeId) -> Result<NodeId> {
    g.concat_cols(&[sentiment, topic])
}

#[derive(Debug, Clone)]
pub struct ChannelOutput {
    /// B×k relation vectors per position; `None` where every row is padding.
    pub relations: Vec<Option<NodeId>>,
    /// B×l attention weights.
    pub alpha: NodeId,
    /// B×k pooled representation.
    pub pooled: NodeId,
}

/// Full channel: relation vectors at every position, attention and pooling.
///
/// `indicator[t]` is the B×q expanded indicator at step t.
pub fn channel_forward<T: Scalar>(
    g: &mut Graph<T>,
    hs: &HiddenStates,
    indicator: &[NodeId],
    lengths: &[usize],
    p: &ChannelNodes,
) -> Result<ChannelOutput> {
    if indicator.len() != hs.steps.len() {
        return Err(Error::Contract(format!(
            "{} channel: {} indicator steps for {} hidden steps",
            p.channel.name(),
            indicator.len(),
            hs.steps.len()
        )));
    }
    let longest = lengths.iter().copied().max().unwrap_or(0);
    let mut relations = Vec::with_capacity(hs.steps.len());
    for (t, (&h, &x)) in hs.steps.iter().zip(indicator).enumerate() {
        relations.push(if t < longest {
            Some(relation_vectors(g, h, x, p)?)
        } else {
            None
        });
    }
    let alpha = attention(g, &relations, lengths, p)?;
    let pooled = attend_pool(g, alpha, &relations)?;
    Ok(ChannelOutput {
        relations,
        alpha,
        pooled,
    })
}
