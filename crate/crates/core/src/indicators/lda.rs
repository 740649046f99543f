//! Latent Dirichlet allocation by collapsed Gibbs sampling.
//!
//! Documents are sequences of vocabulary ids. Padding, unknown and the most
//! frequent `stopwords` ids (2 .. 2+stopwords, because the vocabulary is
//! frequency sorted) are dropped before sampling.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub num_topics: usize,
    /// Document-topic prior; `None` means 50/m.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iters: usize,
    pub infer_iters: usize,
    pub stopwords: usize,
    pub seed: u64,
}

impl LdaConfig {
    pub fn new(num_topics: usize) -> Self {
        LdaConfig {
            num_topics,
            alpha: None,
            beta: 0.01,
            iters: 500,
            infer_iters: 50,
            stopwords: 100,
            seed: 0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.num_topics as f64)
    }
}

/// Fitted topic-word statistics, frozen for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub stopwords: usize,
    pub seed: u64,
    pub vocab_hash: String,
    pub vocab: Vocab,
    /// m×|V| row-major counts.
    topic_word: Vec<u32>,
    topic_totals: Vec<u64>,
}

/// Inferred document-topic distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicVector {
    pub v: Vec<f64>,
    /// True when the document had no usable tokens and `v` is uniform.
    pub degenerate: bool,
}

fn effective_range(vocab_len: usize, stopwords: usize) -> (usize, usize) {
    let lo = (2 + stopwords).min(vocab_len);
    (lo, vocab_len)
}

fn effective_tokens(ids: &[usize], lo: usize, hi: usize) -> Vec<usize> {
    ids.iter().copied().filter(|&w| w >= lo && w < hi).collect()
}

/// Sampler state; exposed so callers can observe each sweep.
pub struct LdaSampler {
    cfg: LdaConfig,
    alpha: f64,
    vocab: Vocab,
    lo: usize,
    num_types: usize,
    docs: Vec<Vec<usize>>,
    z: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<u32>,
    topic_totals: Vec<u64>,
    rng: ChaCha8Rng,
    probs: Vec<f64>,
}

impl LdaSampler {
    pub fn new(docs: &[Vec<usize>], vocab: &Vocab, cfg: LdaConfig) -> Result<Self> {
        if cfg.num_topics < 2 {
            return Err(Error::Config(format!("LDA needs at least 2 topics, got {}", cfg.num_topics)));
        }
        if cfg.iters == 0 {
            return Err(Error::Config("LDA needs at least one sweep".into()));
        }
        let v = vocab.len();
        let (lo, hi) = effective_range(v, cfg.stopwords);
        let docs: Vec<Vec<usize>> = docs.iter().map(|d| effective_tokens(d, lo, hi)).collect();
        if docs.iter().all(Vec::is_empty) {
            return Err(Error::Data("LDA corpus is empty after removing stop words".into()));
        }
        let m = cfg.num_topics;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut topic_word = vec![0u32; m * v];
        let mut topic_totals = vec![0u64; m];
        let mut doc_topic = Vec::with_capacity(docs.len());
        let mut z = Vec::with_capacity(docs.len());
        for d in &docs {
            let mut counts = vec![0u32; m];
            let zs: Vec<usize> = d
                .iter()
                .map(|&w| {
                    let k = rng.gen_range(0..m);
                    counts[k] += 1;
                    topic_word[k * v + w] += 1;
                    topic_totals[k] += 1;
                    k
                })
                .collect();
            doc_topic.push(counts);
            z.push(zs);
        }
        Ok(LdaSampler {
            alpha: cfg.alpha(),
            cfg,
            vocab: vocab.clone(),
            lo,
            num_types: hi - lo,
            docs,
            z,
            doc_topic,
            topic_word,
            topic_totals,
            rng,
            probs: vec![0.0; m],
        })
    }

    /// One full Gibbs sweep over every token.
    pub fn sweep(&mut self) {
        let m = self.cfg.num_topics;
        let v = self.vocab.len();
        let beta = self.cfg.beta;
        let vbeta = self.num_types as f64 * beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.z[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_totals[old] -= 1;

                let mut total = 0.0;
                for k in 0..m {
                    let p = (self.doc_topic[d][k] as f64 + self.alpha) * (self.topic_word[k * v + w] as f64 + beta)
                        / (self.topic_totals[k] as f64 + vbeta);
                    total += p;
                    self.probs[k] = total;
                }
                let u = self.rng.gen::<f64>() * total;
                let new = self.probs.iter().position(|&c| u < c).unwrap_or(m - 1);

                self.z[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_totals[new] += 1;
            }
        }
    }

    pub fn num_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Σ over topics of assigned tokens; equals [`num_tokens`](Self::num_tokens) between sweeps.
    pub fn assigned_tokens(&self) -> u64 {
        self.topic_totals.iter().sum()
    }

    /// True when every count table agrees with the assignment vectors.
    pub fn counts_consistent(&self) -> bool {
        let m = self.cfg.num_topics;
        let v = self.vocab.len();
        let mut tw = vec![0u32; m * v];
        for (d, zs) in self.z.iter().enumerate() {
            let mut dt = vec![0u32; m];
            for (&w, &k) in self.docs[d].iter().zip(zs) {
                dt[k] += 1;
                tw[k * v + w] += 1;
            }
            if dt != self.doc_topic[d] {
                return false;
            }
        }
        let totals_ok = (0..m).all(|k| tw[k * v..(k + 1) * v].iter().map(|&c| c as u64).sum::<u64>() == self.topic_totals[k]);
        tw == self.topic_word && totals_ok
    }

    /// Documents after stop-word filtering.
    pub fn docs(&self) -> &[Vec<usize>] {
        &self.docs
    }

    /// Topic assignment of each filtered token.
    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.z
    }

    /// Collapsed joint log-likelihood log p(w, z).
    pub fn log_likelihood(&self) -> f64 {
        let m = self.cfg.num_topics;
        let v = self.vocab.len();
        let beta = self.cfg.beta;
        let nt = self.num_types as f64;
        let lg = libm::lgamma;
        let mut ll = 0.0;
        for k in 0..m {
            ll += lg(nt * beta) - lg(self.topic_totals[k] as f64 + nt * beta);
            for w in self.lo..v {
                let c = self.topic_word[k * v + w];
                if c > 0 {
                    ll += lg(c as f64 + beta) - lg(beta);
                }
            }
        }
        let a = self.alpha;
        for dt in &self.doc_topic {
            let n: u32 = dt.iter().sum();
            ll += lg(m as f64 * a) - lg(n as f64 + m as f64 * a);
            for &c in dt {
                ll += lg(c as f64 + a) - lg(a);
            }
        }
        ll
    }

    pub fn into_model(self) -> LdaModel {
        LdaModel {
            num_topics: self.cfg.num_topics,
            alpha: self.alpha,
            beta: self.cfg.beta,
            stopwords: self.cfg.stopwords,
            seed: self.cfg.seed,
            vocab_hash: self.vocab.hash(),
            vocab: self.vocab,
            topic_word: self.topic_word,
            topic_totals: self.topic_totals,
        }
    }
}

/// Fits a model with `cfg.iters` sweeps.
pub fn lda_fit(docs: &[Vec<usize>], vocab: &Vocab, cfg: LdaConfig) -> Result<LdaModel> {
    let mut s = LdaSampler::new(docs, vocab, cfg)?;
    for _ in 0..cfg.iters {
        s.sweep();
    }
    Ok(s.into_model())
}

impl LdaModel {
    fn num_types(&self) -> usize {
        let (lo, hi) = effective_range(self.vocab.len(), self.stopwords);
        hi - lo
    }

    pub fn count(&self, topic: usize, word: usize) -> u32 {
        self.topic_word[topic * self.vocab.len() + word]
    }

    pub fn topic_total(&self, topic: usize) -> u64 {
        self.topic_totals[topic]
    }

    /// Smoothed topic-word distribution over the whole vocabulary (zero on excluded ids).
    pub fn phi(&self, topic: usize) -> Vec<f64> {
        let v = self.vocab.len();
        let (lo, _) = effective_range(v, self.stopwords);
        let denom = self.topic_totals[topic] as f64 + self.num_types() as f64 * self.beta;
        (0..v)
            .map(|w| {
                if w < lo {
                    0.0
                } else {
                    (self.topic_word[topic * v + w] as f64 + self.beta) / denom
                }
            })
            .collect()
    }

    /// `n` most probable words of `topic`.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<(String, f64)> {
        let phi = self.phi(topic);
        let mut ids: Vec<usize> = (0..phi.len()).filter(|&w| phi[w] > 0.0).collect();
        ids.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
        ids.into_iter()
            .take(n)
            .map(|w| (self.vocab.token(w).unwrap_or("").to_string(), phi[w]))
            .collect()
    }

    /// Fold-in inference with frozen topic-word counts.
    pub fn infer(&self, ids: &[usize], iters: usize, seed: u64) -> TopicVector {
        let m = self.num_topics;
        let v = self.vocab.len();
        let (lo, hi) = effective_range(v, self.stopwords);
        let doc = effective_tokens(ids, lo, hi);
        if doc.is_empty() {
            return TopicVector {
                v: vec![1.0 / m as f64; m],
                degenerate: true,
            };
        }
        let vbeta = self.num_types() as f64 * self.beta;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u32; m];
        let mut z: Vec<usize> = doc
            .iter()
            .map(|_| {
                let k = rng.gen_range(0..m);
                counts[k] += 1;
                k
            })
            .collect();
        let phi_of = |k: usize, w: usize| (self.topic_word[k * v + w] as f64 + self.beta) / (self.topic_totals[k] as f64 + vbeta);
        let mut cum = vec![0.0; m];
        for _ in 0..iters {
            for (i, &w) in doc.iter().enumerate() {
                counts[z[i]] -= 1;
                let mut total = 0.0;
                for k in 0..m {
                    total += (counts[k] as f64 + self.alpha) * phi_of(k, w);
                    cum[k] = total;
                }
                let u = rng.gen::<f64>() * total;
                let k = cum.iter().position(|&c| u < c).unwrap_or(m - 1);
                z[i] = k;
                counts[k] += 1;
            }
        }
        let n = doc.len() as f64;
        let denom = n + m as f64 * self.alpha;
        TopicVector {
            v: counts.iter().map(|&c| (c as f64 + self.alpha) / denom).collect(),
            degenerate: false,
        }
    }

    /// Inference seeded from `base_seed` and the document content, so the
    /// result for a document does not depend on where it appears.
    pub fn infer_doc(&self, ids: &[usize], iters: usize, base_seed: u64) -> TopicVector {
        self.infer(ids, iters, doc_seed(base_seed, ids))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let model: LdaModel = serde_json::from_slice(&bytes)?;
        if model.vocab.hash() != model.vocab_hash {
            return Err(Error::Data(format!("{}: vocabulary hash mismatch", path.display())));
        }
        if model.topic_word.len() != model.num_topics * model.vocab.len() || model.topic_totals.len() != model.num_topics {
            return Err(Error::Data(format!("{}: count table shape mismatch", path.display())));
        }
        Ok(model)
    }
}

/// FNV-1a over the ids, mixed with `base`.
pub fn doc_seed(base: u64, ids: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ base;
    for &i in ids {
        for b in (i as u64).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// Greedy one-to-one matching of fitted to planted topics.
///
/// `confusion[p][f]` counts tokens of planted topic `p` assigned fitted topic
/// `f`. The largest remaining cell is matched first; the result is the share
/// of tokens on matched cells.
pub fn greedy_purity(confusion: &[Vec<usize>]) -> f64 {
    let total: usize = confusion.iter().flatten().sum();
    if total == 0 {
        return 0.0;
    }
    let rows = confusion.len();
    let cols = confusion.first().map_or(0, Vec::len);
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    let mut matched = 0;
    for _ in 0..rows.min(cols) {
        let mut best: Option<(usize, usize, usize)> = None;
        for (r, row) in confusion.iter().enumerate() {
            for (c, &n) in row.iter().enumerate() {
                if !row_used[r] && !col_used[c] && best.map_or(true, |b| n > b.2) {
                    best = Some((r, c, n));
                }
            }
        }
        let Some((r, c, n)) = best else { break };
        row_used[r] = true;
        col_used[c] = true;
        matched += n;
    }
    matched as f64 / total as f64
}
