//! Named parameter storage and the Adam update rule.
//!
//! Parameters live in insertion order; every iteration over the store
//! is in that order, which keeps update sweeps and checkpoint layout
//! deterministic across runs and platforms.

use std::collections::HashMap;

use crate::tensor::{Tensor, TensorError};

/// One named trainable tensor. `frozen_rows` lists rank-2 rows that
/// must never change (the padding row of an embedding table).
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub frozen_rows: Vec<usize>,
}

impl Parameter {
    /// True when the flat element index falls in a frozen row.
    pub fn is_frozen_element(&self, flat: usize) -> bool {
        if self.frozen_rows.is_empty() {
            return false;
        }
        let cols = self.value.cols();
        self.frozen_rows.contains(&(flat / cols))
    }
}

/// Ordered collection of named parameters.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    params: Vec<Parameter>,
    index: HashMap<String, usize>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Panics on duplicate names: parameter
    /// creation is static model wiring, not data-dependent.
    pub fn insert(&mut self, name: &str, value: Tensor) {
        self.insert_with_frozen_rows(name, value, Vec::new());
    }

    pub fn insert_with_frozen_rows(&mut self, name: &str, value: Tensor, frozen_rows: Vec<usize>) {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter {name}"
        );
        for &r in &frozen_rows {
            for v in &value.row(r).to_vec() {
                assert_eq!(*v, 0.0, "frozen row {r} of {name} must start at zero");
            }
        }
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Parameter {
            name: name.to_string(),
            value,
            frozen_rows,
        });
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> &Parameter {
        &self.params[*self.index.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"))]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Parameter {
        let ix = *self.index.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        &mut self.params[ix]
    }

    pub fn value(&self, name: &str) -> &Tensor {
        &self.get(name).value
    }

    /// Parameters in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Total element count across parameters.
    pub fn element_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected first and second moments. Moment buffers
/// match the store's parameter order and shapes.
pub struct Adam {
    cfg: AdamConfig,
    step_count: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, store: &ParameterStore) -> Self {
        let first_moment = store.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
        let second_moment = store.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
        Self {
            cfg,
            step_count: 0,
            first_moment,
            second_moment,
        }
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.step_count
    }

    /// Applies one update from per-parameter gradients given in store
    /// order. Frozen rows are left untouched and their moments stay
    /// zero. Rejects shape mismatches and non-finite gradients.
    pub fn step(&mut self, store: &mut ParameterStore, grads: &[Tensor]) -> Result<(), TensorError> {
        if grads.len() != store.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                expected: format!("{} gradient tensors", store.len()),
                got: format!("{}", grads.len()),
            });
        }
        for (p, g) in store.iter().zip(grads) {
            if p.value.shape() != g.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_step",
                    expected: format!("{:?} for {}", p.value.shape(), p.name),
                    got: format!("{:?}", g.shape()),
                });
            }
            g.check_finite("adam_step")?;
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let b1 = f64::from(self.cfg.beta1);
        let b2 = f64::from(self.cfg.beta2);
        let bias1 = 1.0 - b1.powi(t);
        let bias2 = 1.0 - b2.powi(t);
        let lr = f64::from(self.cfg.learning_rate);
        let eps = f64::from(self.cfg.epsilon);

        for (ix, (p, g)) in store.iter_mut().zip(grads).enumerate() {
            let frozen = p.frozen_rows.clone();
            let cols = p.value.cols();
            let m = self.first_moment[ix].data_mut();
            let v = self.second_moment[ix].data_mut();
            let theta = p.value.data_mut();
            for i in 0..theta.len() {
                if !frozen.is_empty() && frozen.contains(&(i / cols)) {
                    continue;
                }
                let gi = f64::from(g.data()[i]);
                let mi = b1 * f64::from(m[i]) + (1.0 - b1) * gi;
                let vi = b2 * f64::from(v[i]) + (1.0 - b2) * gi * gi;
                m[i] = mi as f32;
                v[i] = vi as f32;
                let m_hat = mi / bias1;
                let v_hat = vi / bias2;
                theta[i] = (f64::from(theta[i]) - lr * m_hat / (v_hat.sqrt() + eps)) as f32;
            }
        }
        Ok(())
    }
}
