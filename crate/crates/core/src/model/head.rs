use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Matrix, NodeId, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Graph handles of the classification head. `w_l` is d_e×d_l and `w_o`
/// d_l×c, i.e. the transposes of the row-major layer matrices.
#[derive(Debug, Clone, Copy)]
pub struct HeadNodes {
    pub w_l: NodeId,
    pub b_l: NodeId,
    pub w_o: NodeId,
    pub b_o: NodeId,
}

pub(crate) fn init_head<T: Scalar>(
    store: &mut ParamStore<T>,
    d_e: usize,
    d_l: usize,
    classes: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let mut dense = |r: usize, c: usize| {
        let bound = 1.0 / (r as f64).sqrt();
        Matrix::from_fn(r, c, |_, _| T::lit(rng.gen_range(-bound..bound)))
    };
    let w_l = dense(d_e, d_l);
    let w_o = dense(d_l, classes);
    store.insert("head.w_l", w_l, true, true)?;
    store.insert("head.b_l", Matrix::zeros(1, d_l), true, false)?;
    store.insert("head.w_o", w_o, true, true)?;
    store.insert("head.b_o", Matrix::zeros(1, classes), true, false)
}

pub(crate) fn bind_head<T: Scalar>(g: &mut Graph<T>, store: &ParamStore<T>) -> Result<HeadNodes> {
    Ok(HeadNodes {
        w_l: g.param(store, "head.w_l")?,
        b_l: g.param(store, "head.b_l")?,
        w_o: g.param(store, "head.w_o")?,
        b_o: g.param(store, "head.b_o")?,
    })
}

/// `P = softmax(relu(e·W_l + b_l)·W_o + b_o)`; returns `(logits, P)`, both B×c.
pub fn classify<T: Scalar>(g: &mut Graph<T>, e: NodeId, head: &HeadNodes) -> Result<(NodeId, NodeId)> {
    let hidden = g.affine(e, head.w_l, head.b_l)?;
    let hidden = g.relu(hidden);
    let logits = g.affine(hidden, head.w_o, head.b_o)?;
    Ok((logits, g.row_softmax(logits)))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn predict<T: PartialOrd + Copy>(p: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate().skip(1) {
        if x > p[best] {
            best = i;
        }
    }
    best
}

/// Positive per-class loss weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config(format!("class weights must be positive and finite, got {weights:?}")));
        }
        Ok(ClassWeights(weights))
    }

    pub fn uniform(classes: usize) -> Self {
        ClassWeights(vec![1.0; classes])
    }

    /// `w_c ∝ 1 / count_c`, normalized to mean 1. Classes absent from
    /// `labels` are weighted as if they occurred once.
    pub fn inverse_frequency(labels: &[usize], classes: usize) -> Self {
        let mut counts = vec![0usize; classes];
        for &y in labels {
            if y < classes {
                counts[y] += 1;
            }
        }
        let raw: Vec<f64> = counts.iter().map(|&n| 1.0 / n.max(1) as f64).collect();
        let mean = raw.iter().sum::<f64>() / classes as f64;
        ClassWeights(raw.into_iter().map(|w| w / mean).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `−(1/Σ_b w_{y_b}) Σ_b w_{y_b} log P[b, y_b]` as a 1×1 node.
pub fn weighted_cross_entropy<T: Scalar>(
    g: &mut Graph<T>,
    probs: NodeId,
    labels: &[usize],
    weights: &ClassWeights,
) -> Result<NodeId> {
    let (batch, classes) = g.shape(probs);
    if labels.is_empty() || labels.len() != batch {
        return Err(Error::Contract(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if weights.len() != classes {
        return Err(Error::Config(format!("{} class weights for {classes} classes", weights.len())));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Data(format!("label {y} out of range for {classes} classes")));
    }
    let w = weights.as_slice();
    let total: f64 = labels.iter().map(|&y| w[y]).sum();
    let select = Matrix::from_fn(batch, classes, |b, j| {
        if labels[b] == j {
            T::lit(-w[j] / total)
        } else {
            T::zero()
        }
    });
    let select = g.constant(select);
    let logp = g.log(probs);
    let picked = g.mul(select, logp)?;
    Ok(g.sum_all(picked))
}

/// `‖θ‖²` (or `‖θ‖` when `squared` is false) over trainable parameters with
/// the decay flag, i.e. every trainable weight except biases.
pub fn l2_penalty<T: Scalar>(g: &mut Graph<T>, store: &ParamStore<T>, squared: bool) -> Result<Option<NodeId>> {
    let names: Vec<String> = store
        .iter()
        .filter(|(_, p)| p.trainable && p.decay)
        .map(|(n, _)| n.to_string())
        .collect();
    let mut acc: Option<NodeId> = None;
    for name in names {
        let p = g.param(store, &name)?;
        let sq = g.sum_squares(p);
        acc = Some(match acc {
            None => sq,
            Some(a) => g.add(a, sq)?,
        });
    }
    Ok(acc.map(|a| if squared { a } else { g.sqrt(a) }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_with_low_index_ties() {
        assert_eq!(predict(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(predict(&[0.5, 0.5]), 0);
        assert_eq!(predict(&[0.2f32, 0.4, 0.4]), 1);
    }

    #[test]
    fn inverse_frequency_has_unit_mean() {
        let w = ClassWeights::inverse_frequency(&[0, 0, 0, 1], 2);
        // raw 1/3 and 1, mean 2/3
        assert!((w.as_slice()[0] - 0.5).abs() < 1e-15);
        assert!((w.as_slice()[1] - 1.5).abs() < 1e-15);
        assert!(ClassWeights::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn uniform_probabilities_give_log_c() {
        for c in [2usize, 3, 5] {
            let mut g = Graph::<f64>::new();
            let p = g.constant(Matrix::filled(3, c, 1.0 / c as f64));
            let l = weighted_cross_entropy(&mut g, p, &[0, c - 1, 1], &ClassWeights::uniform(c)).unwrap();
            assert!((g.value(l).item() - (c as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_predictions_have_zero_loss() {
        let mut g = Graph::<f64>::new();
        let p = g.constant(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let l = weighted_cross_entropy(&mut g, p, &[0, 1], &ClassWeights::uniform(2)).unwrap();
        assert!(g.value(l).item().abs() <= 1e-10);
    }

    #[test]
    fn weighted_mean_matches_hand_arithmetic() {
        let rows = [[0.7, 0.3], [0.4, 0.6], [0.9, 0.1]];
        let labels = [0usize, 1, 1];
        let w = [1.0, 2.0];
        let mut g = Graph::<f64>::new();
        let p = g.constant(Matrix::from_fn(3, 2, |i, j| rows[i][j]));
        let l = weighted_cross_entropy(&mut g, p, &labels, &ClassWeights::new(w.to_vec()).unwrap()).unwrap();
        // (1·ln0.7 + 2·ln0.6 + 2·ln0.1) / (1 + 2 + 2)
        let expected = -(0.7f64.ln() + 2.0 * 0.6f64.ln() + 2.0 * 0.1f64.ln()) / 5.0;
        assert!((g.value(l).item() - expected).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_label_is_an_error() {
        let mut g = Graph::<f64>::new();
        let p = g.constant(Matrix::filled(1, 2, 0.5));
        assert!(weighted_cross_entropy(&mut g, p, &[2], &ClassWeights::uniform(2)).is_err());
    }

    #[test]
    fn penalty_skips_biases_and_frozen() {
        let mut store = ParamStore::<f64>::new();
        store.insert("w", Matrix::row_vector(&[3.0, 4.0]), true, true).unwrap();
        store.insert("b", Matrix::row_vector(&[10.0]), true, false).unwrap();
        store.insert("emb", Matrix::row_vector(&[7.0]), false, true).unwrap();
        let mut g = Graph::new();
        let sq = l2_penalty(&mut g, &store, true).unwrap().unwrap();
        assert_eq!(g.value(sq).item(), 25.0);
        let norm = l2_penalty(&mut g, &store, false).unwrap().unwrap();
        assert_eq!(g.value(norm).item(), 5.0);
    }
}
