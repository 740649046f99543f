use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Confusion matrix and the metrics derived from it. `confusion[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Support-weighted averages.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_confusion(confusion: Vec<Vec<usize>>, labels: &[String]) -> Result<Self> {
        let c = confusion.len();
        if c == 0 || confusion.iter().any(|r| r.len() != c) || labels.len() != c {
            return Err(Error::Contract(format!(
                "confusion matrix must be square over {} labels",
                labels.len()
            )));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Data("cannot evaluate an empty dataset".into()));
        }
        let mut per_class = Vec::with_capacity(c);
        for k in 0..c {
            let tp = confusion[k][k];
            let support: usize = confusion[k].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[k]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            per_class.push(ClassMetrics {
                label: labels[k].clone(),
                precision,
                recall,
                f1,
                support,
            });
        }
        let weighted = |f: fn(&ClassMetrics) -> f64| {
            per_class.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / total as f64
        };
        let trace: usize = (0..c).map(|k| confusion[k][k]).sum();
        Ok(EvalReport {
            accuracy: ratio(trace, total),
            precision: weighted(|m| m.precision),
            recall: weighted(|m| m.recall),
            f1: weighted(|m| m.f1),
            per_class,
            confusion,
        })
    }

    /// Builds the confusion matrix from label pairs.
    pub fn from_predictions(truth: &[usize], predicted: &[usize], labels: &[String]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Contract(format!(
                "{} true labels for {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let c = labels.len();
        let mut confusion = vec![vec![0usize; c]; c];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= c || p >= c {
                return Err(Error::Data(format!("label index out of range for {c} classes")));
            }
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion, labels)
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Human-readable table.
    pub fn render(&self) -> String {
        let mut out = format!(
            "accuracy  {:.4}\nprecision {:.4}\nrecall    {:.4}\nf1        {:.4}\n\nlabel\tprecision\trecall\tf1\tsupport\n",
            self.accuracy, self.precision, self.recall, self.f1
        );
        for m in &self.per_class {
            out.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:.4}\t{}\n",
                m.label, m.precision, m.recall, m.f1, m.support
            ));
        }
        out.push_str("\nconfusion (rows = true)\n");
        for row in &self.confusion {
            out.push_str(&row.iter().map(usize::to_string).collect::<Vec<_>>().join("\t"));
            out.push('\n');
        }
        out
    }
}
