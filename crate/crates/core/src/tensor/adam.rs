//! Named parameter storage and the Adam update rule.

use std::cell::RefCell;
use std::collections::HashMap;

use super::mat::Mat;
use super::tape::{Tape, Tensor, TensorError};

/// Ordered collection of named parameter matrices.
#[derive(Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: HashMap<String, Mat>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Mat) {
        let name = name.into();
        if !self.values.contains_key(&name) {
            self.names.push(name.clone());
        }
        self.values.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.values.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.values.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    /// Names in insertion order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names.iter().map(move |n| (n.as_str(), &self.values[n]))
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.iter().map(|(_, m)| m.len()).sum()
    }
}

/// One forward pass's view of a [`ParamStore`]: parameters become leaf
/// tensors on the tape the first time they are requested, and their
/// gradients can be harvested after `backward`.
pub struct Bound<'a> {
    tape: Tape,
    store: &'a ParamStore,
    bound: RefCell<Vec<(String, Tensor)>>,
}

impl<'a> Bound<'a> {
    pub fn new(tape: &Tape, store: &'a ParamStore) -> Self {
        Bound { tape: tape.clone(), store, bound: RefCell::new(Vec::new()) }
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// Leaf tensor for a named parameter (bound once per pass).
    pub fn param(&self, name: &str) -> Result<Tensor, TensorError> {
        if let Some((_, t)) = self.bound.borrow().iter().find(|(n, _)| n == name) {
            return Ok(t.clone());
        }
        let value = self.store.get(name).ok_or_else(|| TensorError::Invalid {
            op: "bind",
            msg: format!("unknown parameter `{name}`"),
        })?;
        let tensor = self.tape.leaf(value.clone());
        self.bound.borrow_mut().push((name.to_string(), tensor.clone()));
        Ok(tensor)
    }

    /// Gradients of every bound parameter, in binding order. Parameters the
    /// loss never touched get zero gradients.
    pub fn grads(&self) -> Vec<(String, Mat)> {
        self.bound
            .borrow()
            .iter()
            .map(|(name, tensor)| {
                let g = tensor
                    .grad()
                    .unwrap_or_else(|| Mat::zeros(tensor.rows(), tensor.cols()));
                (name.clone(), g)
            })
            .collect()
    }
}

/// Adam state: per-parameter moment estimates plus the shared step counter
/// and hyperparameters.
#[derive(Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    first_moment: HashMap<String, Mat>,
    second_moment: HashMap<String, Mat>,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: HashMap::new(),
            second_moment: HashMap::new(),
        }
    }
}

/// One Adam update with bias correction, applied in gradient order.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &[(String, Mat)],
    state: &mut AdamState,
) -> Result<(), TensorError> {
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (name, grad) in grads {
        let param = params.get_mut(name).ok_or_else(|| TensorError::Invalid {
            op: "adam_step",
            msg: format!("gradient for unknown parameter `{name}`"),
        })?;
        if param.shape() != grad.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                lhs_rows: param.rows(),
                lhs_cols: param.cols(),
                rhs_rows: grad.rows(),
                rhs_cols: grad.cols(),
            });
        }
        let m = state
            .first_moment
            .entry(name.clone())
            .or_insert_with(|| Mat::zeros(param.rows(), param.cols()));
        let v = state
            .second_moment
            .entry(name.clone())
            .or_insert_with(|| Mat::zeros(param.rows(), param.cols()));
        let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);
        for ((p, g), (mv, vv)) in param
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
        {
            *mv = b1 * *mv + (1.0 - b1) * g;
            *vv = b2 * *vv + (1.0 - b2) * g * g;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = ParamStore::new();
        params.insert("w", Mat::scalar(1.0));
        let mut state = AdamState::new(0.01);
        adam_step(&mut params, &[("w".into(), Mat::scalar(1.0))], &mut state).unwrap();
        let delta = params.get("w").unwrap().get(0, 0) - 1.0;
        assert!((delta + 0.01).abs() < 1e-6, "delta = {delta}");
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = ParamStore::new();
        params.insert("w", Mat::from_rows(&[&[2.0, -3.0]]));
        let before = params.get("w").unwrap().clone();
        let mut state = AdamState::new(0.01);
        for _ in 0..5 {
            adam_step(&mut params, &[("w".into(), Mat::zeros(1, 2))], &mut state).unwrap();
        }
        assert_eq!(*params.get("w").unwrap(), before);
    }

    #[test]
    fn equal_gradients_give_identical_updates() {
        let mut params = ParamStore::new();
        params.insert("a", Mat::scalar(0.5));
        params.insert("b", Mat::scalar(0.5));
        let mut state = AdamState::new(0.01);
        let grads = vec![("a".to_string(), Mat::scalar(0.3)), ("b".to_string(), Mat::scalar(0.3))];
        for _ in 0..7 {
            adam_step(&mut params, &grads, &mut state).unwrap();
        }
        assert_eq!(params.get("a").unwrap().get(0, 0), params.get("b").unwrap().get(0, 0));
    }

    #[test]
    fn first_step_magnitude_bounded_by_lr_for_constant_grad() {
        let mut params = ParamStore::new();
        params.insert("w", Mat::filled(3, 3, 0.0));
        let mut state = AdamState::new(0.01);
        adam_step(&mut params, &[("w".into(), Mat::filled(3, 3, -4.2))], &mut state).unwrap();
        for &p in params.get("w").unwrap().data() {
            assert!((p.abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut params = ParamStore::new();
        params.insert("w", Mat::zeros(2, 2));
        let mut state = AdamState::new(0.01);
        let err = adam_step(&mut params, &[("w".into(), Mat::zeros(1, 2))], &mut state).unwrap_err();
        assert!(matches!(err, TensorError::ShapeMismatch { op: "adam_step", .. }));
    }
}
