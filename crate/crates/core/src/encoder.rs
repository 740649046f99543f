//! Embedding lookup and a single-layer bidirectional LSTM.
//!
//! Everything is batched: a batch of B documents is processed one time step
//! at a time, each step a B×d input. Scans stop at each document's mask
//! boundary: padded positions produce zero hidden rows and carry zero state,
//! so the hidden states of real tokens do not depend on the padded length.

use rand::Rng;

use crate::autodiff::{Graph, Matrix, NodeId, ParamStore};
use crate::corpus::EncodedDoc;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parameter shapes of one LSTM direction. Gate order is `[i, f, g, o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub prefix: String,
    pub input_dim: usize,
    pub hidden: usize,
}

/// Graph handles of one bound LSTM direction.
#[derive(Debug, Clone, Copy)]
pub struct LstmNodes {
    pub w_x: NodeId,
    pub w_h: NodeId,
    pub b: NodeId,
    pub hidden: usize,
}

impl LstmParams {
    pub fn new(prefix: impl Into<String>, input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            prefix: prefix.into(),
            input_dim,
            hidden,
        }
    }

    pub fn name(&self, part: &str) -> String {
        format!("{}.{}", self.prefix, part)
    }

    /// Weights U(−1/√n, 1/√n); biases zero except the forget gate, which starts at 1.
    pub fn init<T: Scalar>(&self, store: &mut ParamStore<T>, rng: &mut impl Rng) -> Result<()> {
        let n = self.hidden;
        let bound = 1.0 / (n as f64).sqrt();
        let mut uniform = |r, c| Matrix::from_fn(r, c, |_, _| T::lit(rng.gen_range(-bound..bound)));
        let w_x = uniform(self.input_dim, 4 * n);
        let w_h = uniform(n, 4 * n);
        let b = Matrix::from_fn(1, 4 * n, |_, j| if (n..2 * n).contains(&j) { T::one() } else { T::zero() });
        store.insert(&self.name("w_x"), w_x, true, true)?;
        store.insert(&self.name("w_h"), w_h, true, true)?;
        store.insert(&self.name("b"), b, true, false)
    }

    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>) -> Result<LstmNodes> {
        let nodes = LstmNodes {
            w_x: g.param(store, &self.name("w_x"))?,
            w_h: g.param(store, &self.name("w_h"))?,
            b: g.param(store, &self.name("b"))?,
            hidden: self.hidden,
        };
        let expect = [
            (nodes.w_x, (self.input_dim, 4 * self.hidden)),
            (nodes.w_h, (self.hidden, 4 * self.hidden)),
            (nodes.b, (1, 4 * self.hidden)),
        ];
        for (id, shape) in expect {
            if g.shape(id) != shape {
                return Err(Error::Shape {
                    op: "lstm_params",
                    lhs: shape,
                    rhs: g.shape(id),
                });
            }
        }
        Ok(nodes)
    }

    pub fn num_scalars(&self) -> usize {
        let n = self.hidden;
        self.input_dim * 4 * n + n * 4 * n + 4 * n
    }
}

/// One LSTM step over a batch: returns `(h_t, c_t)`.
///
/// `i, f, o = σ(·)`, `g = tanh(·)`, `c_t = f⊙c_prev + i⊙g`, `h_t = o⊙tanh(c_t)`.
pub fn lstm_cell<T: Scalar>(
    g: &mut Graph<T>,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
    p: &LstmNodes,
) -> Result<(NodeId, NodeId)> {
    let n = p.hidden;
    let zx = g.matmul(x, p.w_x)?;
    let zh = g.matmul(h_prev, p.w_h)?;
    let z = g.add(zx, zh)?;
    let z = g.add_row(z, p.b)?;
    let zi = g.slice_cols(z, 0, n)?;
    let zf = g.slice_cols(z, n, 2 * n)?;
    let zg = g.slice_cols(z, 2 * n, 3 * n)?;
    let zo = g.slice_cols(z, 3 * n, 4 * n)?;
    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let cand = g.tanh(zg);
    let o = g.sigmoid(zo);
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

/// Per-step embedded inputs for a batch: element `t` is B×d with row `b` the
/// embedding of `docs[b].ids[t]`.
pub fn embed_steps<T: Scalar>(g: &mut Graph<T>, table: NodeId, docs: &[&EncodedDoc]) -> Result<Vec<NodeId>> {
    let l = docs.first().map_or(0, |d| d.max_len());
    if docs.iter().any(|d| d.max_len() != l) {
        return Err(Error::Contract("documents in a batch must share a padded length".into()));
    }
    (0..l)
        .map(|t| {
            let ids: Vec<usize> = docs.iter().map(|d| d.ids[t]).collect();
            g.gather_rows(table, &ids)
        })
        .collect()
}

/// l×d embedding matrix of one document.
pub fn embed<T: Scalar>(g: &mut Graph<T>, table: NodeId, doc: &EncodedDoc) -> Result<NodeId> {
    g.gather_rows(table, &doc.ids)
}

/// Hidden states of a batch: `steps[t]` is B×2n, row b = concat(→h_t, ←h_t) of document b.
#[derive(Debug, Clone)]
pub struct HiddenStates {
    pub steps: Vec<NodeId>,
    pub hidden: usize,
}

impl HiddenStates {
    /// l×2n hidden-state matrix of batch row `b`.
    pub fn matrix<T: Scalar>(&self, g: &Graph<T>, b: usize) -> Matrix<T> {
        let width = 2 * self.hidden;
        Matrix::from_fn(self.steps.len(), width, |t, j| g.value(self.steps[t])[(b, j)])
    }
}

fn step_mask<T: Scalar>(lengths: &[usize], t: usize, n: usize) -> Option<Matrix<T>> {
    if lengths.iter().all(|&len| t < len) {
        return None;
    }
    Some(Matrix::from_fn(lengths.len(), n, |b, _| if t < lengths[b] { T::one() } else { T::zero() }))
}

/// Forward scan over t = 0..l and backward scan over t = l−1..0, each
/// starting from zero state. `lengths[b]` is the number of real tokens of
/// batch row `b`; steps at or beyond it produce zero rows and zero state.
pub fn bilstm<T: Scalar>(
    g: &mut Graph<T>,
    xs: &[NodeId],
    lengths: &[usize],
    fwd: &LstmNodes,
    bwd: &LstmNodes,
) -> Result<HiddenStates> {
    if fwd.hidden != bwd.hidden {
        return Err(Error::Contract("both LSTM directions need the same hidden size".into()));
    }
    let n = fwd.hidden;
    let batch = lengths.len();
    let l = xs.len();
    let longest = lengths.iter().copied().max().unwrap_or(0).min(l);
    let zeros = g.constant(Matrix::zeros(batch, n));

    let scan = |g: &mut Graph<T>, order: &mut dyn Iterator<Item = usize>, p: &LstmNodes| -> Result<Vec<NodeId>> {
        let mut out = vec![zeros; l];
        let (mut h, mut c) = (zeros, zeros);
        for t in order {
            if t >= longest {
                // every row is padding here
                h = zeros;
                c = zeros;
                continue;
            }
            let (h_new, c_new) = lstm_cell(g, xs[t], h, c, p)?;
            match step_mask(lengths, t, n) {
                None => {
                    h = h_new;
                    c = c_new;
                }
                Some(m) => {
                    let m = g.constant(m);
                    h = g.mul(m, h_new)?;
                    c = g.mul(m, c_new)?;
                }
            }
            out[t] = h;
        }
        Ok(out)
    };
    let forward = scan(g, &mut (0..l), fwd)?;
    let backward = scan(g, &mut (0..l).rev(), bwd)?;
    let steps = forward
        .iter()
        .zip(&backward)
        .map(|(&f, &b)| g.concat_cols(&[f, b]))
        .collect::<Result<Vec<_>>>()?;
    Ok(HiddenStates { steps, hidden: n })
}
