use super::graph::{Graph, NodeId};
use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index where the maximum was attained.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares reverse-mode gradients against central differences.
///
/// `build` must construct a scalar (1×1) output from the parameters bound out
/// of `point` and must be deterministic. Every entry of every trainable
/// parameter is perturbed by ±`eps`. The per-entry error is
/// `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<T, F>(point: &ParamStore<T>, eps: f64, build: F) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, &ParamStore<T>) -> Result<NodeId>,
{
    if !(eps > 0.0) {
        return Err(Error::Contract(format!("grad_check step must be positive, got {eps}")));
    }
    let mut g = Graph::new();
    let out = build(&mut g, point)?;
    g.backward(out)?;
    let analytic = g.param_grads();

    let eval = |store: &ParamStore<T>| -> Result<f64> {
        let mut g = Graph::new();
        let out = build(&mut g, store)?;
        let v = g.value(out);
        if v.shape() != (1, 1) {
            return Err(Error::Contract("grad_check output must be 1x1".into()));
        }
        Ok(v.item().as_f64())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let mut probe = point.clone();
    for (name, grad) in &analytic {
        for i in 0..grad.len() {
            let orig = probe.value(name).expect("bound parameter").data()[i];
            probe.value_mut(name).unwrap().data_mut()[i] = orig + T::lit(eps);
            let plus = eval(&probe)?;
            probe.value_mut(name).unwrap().data_mut()[i] = orig - T::lit(eps);
            let minus = eval(&probe)?;
            probe.value_mut(name).unwrap().data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[i].as_f64();
            if !a.is_finite() || !numeric.is_finite() {
                return Err(Error::NonFinite {
                    name: name.clone(),
                    context: format!("gradient check at index {i}: analytic {a}, numeric {numeric}"),
                });
            }
            let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}
