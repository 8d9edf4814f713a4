use std::collections::BTreeMap;

use crate::error::{shape_err, Result, TensorError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Hyperparameters of the adaptive-moment update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment accumulators keyed by parameter name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState<S: Scalar = f32> {
    pub step: u64,
    pub first_moment: BTreeMap<String, Tensor<S>>,
    pub second_moment: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new() -> Self {
        Self { step: 0, first_moment: BTreeMap::new(), second_moment: BTreeMap::new() }
    }
}

/// Applies one bias-corrected Adam update to every parameter in `params`.
///
/// All gradients are validated before any parameter is touched, so a rejected step
/// leaves `params` and `state` unchanged.
pub fn adam_step<S: Scalar>(
    params: &mut BTreeMap<String, Tensor<S>>,
    grads: &BTreeMap<String, Tensor<S>>,
    state: &mut AdamState<S>,
    config: &AdamConfig,
) -> Result<()> {
    for (name, p) in params.iter() {
        let g = grads.get(name).ok_or_else(|| TensorError::UnknownParameter(name.clone()))?;
        if g.shape() != p.shape() {
            return shape_err("adam_step", format!("gradient for `{name}` has shape {:?}, parameter {:?}", g.shape(), p.shape()));
        }
        if !g.all_finite() {
            return Err(TensorError::NonFiniteGradient(name.clone()));
        }
        for moments in [&state.first_moment, &state.second_moment] {
            if let Some(m) = moments.get(name) {
                if m.shape() != p.shape() {
                    return shape_err("adam_step", format!("moment for `{name}` has shape {:?}", m.shape()));
                }
            }
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (S::from_f64(config.beta1), S::from_f64(config.beta2));
    let correction1 = S::one() - S::from_f64(config.beta1.powi(t));
    let correction2 = S::one() - S::from_f64(config.beta2.powi(t));
    let (lr, eps) = (S::from_f64(config.lr), S::from_f64(config.eps));

    for (name, p) in params.iter_mut() {
        let g = &grads[name];
        let m = state.first_moment.entry(name.clone()).or_insert_with(|| Tensor::zeros(p.shape().to_vec()));
        let v = state.second_moment.entry(name.clone()).or_insert_with(|| Tensor::zeros(p.shape().to_vec()));
        for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *mv = b1 * *mv + (S::one() - b1) * gv;
            *vv = b2 * *vv + (S::one() - b2) * gv * gv;
            let m_hat = *mv / correction1;
            let v_hat = *vv / correction2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(value: f64, n: usize) -> BTreeMap<String, Tensor<f64>> {
        BTreeMap::from([("w".to_owned(), Tensor::full(vec![n], value))])
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = one_param(0.7, 4);
        let grads = one_param(0.0, 4);
        let mut state = AdamState::new();
        adam_step(&mut params, &grads, &mut state, &AdamConfig::default()).unwrap();
        assert_eq!(params["w"].data(), &[0.7; 4]);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let config = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        let mut params = BTreeMap::from([("w".to_owned(), Tensor::<f64>::new(vec![2], vec![1.0, 1.0]).unwrap())]);
        let grads = BTreeMap::from([("w".to_owned(), Tensor::new(vec![2], vec![3.0, -0.5]).unwrap())]);
        let mut state = AdamState::new();
        adam_step(&mut params, &grads, &mut state, &config).unwrap();
        // m̂ = g and v̂ = g², so the step is lr·g/(|g| + eps)
        assert!((params["w"].data()[0] - (1.0 - 0.01)).abs() < 1e-8);
        assert!((params["w"].data()[1] - (1.0 + 0.01)).abs() < 1e-8);
        assert_eq!(state.first_moment["w"].shape(), &[2]);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_side_effects() {
        let mut params = one_param(1.0, 2);
        let grads = BTreeMap::from([("w".to_owned(), Tensor::new(vec![2], vec![f64::NAN, 1.0]).unwrap())]);
        let mut state = AdamState::new();
        let err = adam_step(&mut params, &grads, &mut state, &AdamConfig::default()).unwrap_err();
        assert_eq!(err, TensorError::NonFiniteGradient("w".into()));
        assert_eq!(state.step, 0);
        assert_eq!(params["w"].data(), &[1.0, 1.0]);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut params = BTreeMap::from([("w".to_owned(), Tensor::<f32>::from_fn(vec![5], |i| i as f32 * 0.3))]);
            let mut state = AdamState::new();
            for k in 0..10 {
                let grads = BTreeMap::from([("w".to_owned(), Tensor::from_fn(vec![5], |i| ((i + k) as f32).sin()))]);
                adam_step(&mut params, &grads, &mut state, &AdamConfig::default()).unwrap();
            }
            (params, state)
        };
        assert_eq!(run(), run());
    }
}
