use crate::{Scalar, Tensor, TensorError};

/// Adam optimizer state: first/second moment estimates per parameter tensor
/// plus the step counter used for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    /// State with the usual defaults (β₁ = 0.9, β₂ = 0.999, ε = 1e-8),
    /// sized after `params`.
    pub fn new(lr: T, params: &[Tensor<T>]) -> Self {
        AdamState {
            lr,
            beta1: T::from_f64(0.9).unwrap(),
            beta2: T::from_f64(0.999).unwrap(),
            eps: T::from_f64(1e-8).unwrap(),
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of every parameter in place.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Vec<T>]) -> Result<(), TensorError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                detail: format!(
                    "{} params, {} grads, state sized for {}",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        let one = T::one();
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            if p.len() != g.len() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_step",
                    detail: format!("param has {} values, grad {}", p.len(), g.len()),
                });
            }
            let pm = m.values_mut();
            let pv = v.values_mut();
            for (i, (&gi, pi)) in g.iter().zip(p.values_mut()).enumerate() {
                pm[i] = self.beta1 * pm[i] + (one - self.beta1) * gi;
                pv[i] = self.beta2 * pv[i] + (one - self.beta2) * gi * gi;
                let m_hat = pm[i] / bc1;
                let v_hat = pv[i] / bc2;
                *pi -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
