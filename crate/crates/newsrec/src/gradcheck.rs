//! Central finite-difference verification of tape gradients.
//!
//! The checker rebuilds the computation from scratch for every probe,
//! so the closure must be a pure function of the parameter values it
//! is handed (same leaf order as the store).

use crate::optim::ParameterStore;
use crate::tape::{NodeId, Tape};
use crate::tensor::{Tensor, TensorError};

/// Worst observed disagreement between analytic and finite-difference
/// gradients, with its location.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_parameter: String,
    pub worst_element: usize,
    pub elements_checked: usize,
    pub elements_excluded: usize,
}

fn eval_loss<F>(values: &[Tensor], f: &F) -> Result<f32, TensorError>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, TensorError>,
{
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = values.iter().map(|v| tape.leaf(v.clone())).collect();
    let loss = f(&mut tape, &ids)?;
    let t = tape.value(loss);
    if t.len() != 1 {
        return Err(TensorError::NonScalarOutput {
            shape: t.shape().to_vec(),
        });
    }
    Ok(t.item())
}

/// Compares tape gradients against central differences over every
/// trainable element. Elements in frozen rows are skipped: their
/// analytic gradient is pinned to zero by construction while the loss
/// may still be sensitive to the stored value.
///
/// The relative error for one element is
/// |g_ad - g_fd| / max(1, |g_ad| + |g_fd|).
pub fn gradient_check<F>(store: &ParameterStore, epsilon: f32, f: F) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, TensorError>,
{
    gradient_check_excluding(store, epsilon, f, |_, _| false)
}

/// Like [`gradient_check`] but skipping the elements named by
/// `exclude` (parameter name, flat element index). Intended for probes
/// that would step across a non-differentiable point, such as a ReLU
/// pre-activation closer to zero than the perturbation can move it:
/// there the central difference measures the kink, not the gradient,
/// and the comparison carries no information. Excluded elements are
/// counted in the report so callers can verify coverage stays high.
pub fn gradient_check_excluding<F, S>(
    store: &ParameterStore,
    epsilon: f32,
    f: F,
    exclude: S,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, TensorError>,
    S: Fn(&str, usize) -> bool,
{
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut values: Vec<Tensor> = store.iter().map(|p| p.value.clone()).collect();

    // analytic gradients from one recorded pass
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = values.iter().map(|v| tape.leaf(v.clone())).collect();
    let loss = f(&mut tape, &ids)?;
    if tape.value(loss).len() != 1 {
        return Err(TensorError::NonScalarOutput {
            shape: tape.value(loss).shape().to_vec(),
        });
    }
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| grads.wrt_or_zeros(&tape, id)).collect();
    drop(tape);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_parameter: String::new(),
        worst_element: 0,
        elements_checked: 0,
        elements_excluded: 0,
    };
    for (ix, param) in store.iter().enumerate() {
        for flat in 0..param.value.len() {
            if param.is_frozen_element(flat) {
                continue;
            }
            if exclude(&param.name, flat) {
                report.elements_excluded += 1;
                continue;
            }
            let original = values[ix].data()[flat];
            values[ix].data_mut()[flat] = original + epsilon;
            let loss_plus = f64::from(eval_loss(&values, &f)?);
            values[ix].data_mut()[flat] = original - epsilon;
            let loss_minus = f64::from(eval_loss(&values, &f)?);
            values[ix].data_mut()[flat] = original;

            let fd = (loss_plus - loss_minus) / (2.0 * f64::from(epsilon));
            let ad = f64::from(analytic[ix].data()[flat]);
            let rel = (ad - fd).abs() / 1.0f64.max(ad.abs() + fd.abs());
            report.elements_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_parameter = param.name.clone();
                report.worst_element = flat;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_exact() {
        // loss = <w, w>, gradient 2w
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::vector(vec![0.5, -1.25, 2.0]));
        let report = gradient_check(&store, 1e-3, |tape, ids| tape.dot(ids[0], ids[0])).unwrap();
        assert_eq!(report.elements_checked, 3);
        assert!(report.max_rel_error < 1e-3, "rel {}", report.max_rel_error);
    }

    #[test]
    fn tanh_chain_checks_out() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::matrix(2, 3, vec![0.3, -0.2, 0.5, 0.1, 0.4, -0.6]));
        store.insert("q", Tensor::vector(vec![0.8, -0.3]));
        let x = Tensor::matrix(4, 3, (0..12).map(|i| (i as f32) * 0.17 - 0.9).collect());
        let report = gradient_check(&store, 1e-3, move |tape, ids| {
            let xs = tape.leaf(x.clone());
            let proj = tape.matmul_nt(xs, ids[0])?;
            let act = tape.tanh(proj);
            let scores = tape.matvec(act, ids[1])?;
            tape.sum_all(scores)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-2, "rel {}", report.max_rel_error);
    }

    #[test]
    fn frozen_rows_are_skipped() {
        // lookups include the pad row, whose analytic gradient is pinned
        // to zero; the checker must not flag it
        let mut store = ParameterStore::new();
        store.insert_with_frozen_rows(
            "emb",
            Tensor::matrix(3, 2, vec![0.0, 0.0, 0.7, -0.4, 0.2, 0.9]),
            vec![0],
        );
        let report = gradient_check(&store, 1e-3, |tape, ids| {
            let looked = tape.embed_lookup(ids[0], &[0, 1, 2, 0])?;
            tape.sum_all(looked)
        })
        .unwrap();
        assert_eq!(report.elements_checked, 4);
        assert!(report.max_rel_error < 1e-3, "rel {}", report.max_rel_error);
    }

    #[test]
    fn kink_probes_can_be_excluded() {
        // relu is non-differentiable at zero: a probe straddling the
        // kink reports roughly half the one-sided slope, which is a
        // measurement failure rather than a backward bug
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::vector(vec![0.9, 0.0, -0.7]));
        let f = |tape: &mut Tape, ids: &[NodeId]| {
            let r = tape.relu(ids[0]);
            tape.sum_all(r)
        };
        let raw = gradient_check(&store, 1e-3, f).unwrap();
        assert!(raw.max_rel_error > 0.1, "straddle must disagree, got {}", raw.max_rel_error);
        assert_eq!(raw.worst_parameter, "w");
        assert_eq!(raw.worst_element, 1);

        let filtered =
            gradient_check_excluding(&store, 1e-3, f, |name, flat| name == "w" && flat == 1).unwrap();
        assert_eq!(filtered.elements_checked, 2);
        assert_eq!(filtered.elements_excluded, 1);
        assert!(filtered.max_rel_error < 1e-3, "rel {}", filtered.max_rel_error);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::vector(vec![1.0, 2.0]));
        let err = gradient_check(&store, 1e-3, |_tape, ids| Ok(ids[0])).unwrap_err();
        assert!(matches!(err, TensorError::NonScalarOutput { .. }));
    }

    #[test]
    fn softmax_cross_entropy_path() {
        let mut store = ParameterStore::new();
        store.insert("logit_w", Tensor::matrix(5, 3, (0..15).map(|i| (i as f32) * 0.1 - 0.7).collect()));
        let x = Tensor::vector(vec![0.4, -0.9, 0.3]);
        let report = gradient_check(&store, 1e-3, move |tape, ids| {
            let xv = tape.leaf(x.clone());
            let logits = tape.matvec(ids[0], xv)?;
            tape.softmax_cross_entropy(logits, 2)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-2, "rel {}", report.max_rel_error);
    }
}
