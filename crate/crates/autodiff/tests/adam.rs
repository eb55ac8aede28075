use spraygnn_autodiff::{AdamState, Tensor};

/// Independent scalar Adam, written directly from the update rule. Used as
/// the reference for the tensor implementation.
struct ScalarAdam {
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    m: f64,
    v: f64,
    t: i32,
}

impl ScalarAdam {
    fn new(lr: f64) -> Self {
        ScalarAdam { lr, b1: 0.9, b2: 0.999, eps: 1e-8, m: 0.0, v: 0.0, t: 0 }
    }

    fn step(&mut self, x: f64, g: f64) -> f64 {
        self.t += 1;
        self.m = self.b1 * self.m + (1.0 - self.b1) * g;
        self.v = self.b2 * self.v + (1.0 - self.b2) * g * g;
        let m_hat = self.m / (1.0 - self.b1.powi(self.t));
        let v_hat = self.v / (1.0 - self.b2.powi(self.t));
        x - self.lr * m_hat / (v_hat.sqrt() + self.eps)
    }
}

#[test]
fn first_step_magnitude_is_roughly_lr_times_sign() {
    let mut params = vec![Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap()];
    let grads = vec![vec![0.3, -0.7, 2.0]];
    let mut state = AdamState::new(0.01, &params);
    state.step(&mut params, &grads).unwrap();
    let p = params[0].values();
    for (i, (&before, &g)) in [1.0f64, -2.0, 0.5].iter().zip(&grads[0]).enumerate() {
        let update = before - p[i];
        assert!((update - 0.01 * g.signum()).abs() < 1e-6, "element {i}: update {update}");
    }
}

#[test]
fn zero_gradient_leaves_parameters_unchanged() {
    let mut params = vec![Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()];
    let grads = vec![vec![0.0; 4]];
    let mut state = AdamState::new(0.1, &params);
    for _ in 0..5 {
        state.step(&mut params, &grads).unwrap();
    }
    assert_eq!(params[0].values(), &[1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn matches_scalar_reference_on_quadratic() {
    // Minimize f(x) = x² from x = 5 with lr = 0.1; gradient is 2x.
    let mut params = vec![Tensor::scalar(5.0)];
    let mut state = AdamState::new(0.1, &params);
    let mut reference = ScalarAdam::new(0.1);
    let mut x_ref = 5.0f64;

    // Reference run: |x| falls monotonically through the descent and only
    // wobbles at ~0.04 scale once it is far below the 0.5 target.
    let mut prev_abs = 5.0f64;
    let mut descent_monotone = true;
    let mut reached_bottom = false;
    for step in 0..100 {
        let g = 2.0 * params[0].values()[0];
        state.step(&mut params, &[vec![g]]).unwrap();
        x_ref = reference.step(x_ref, 2.0 * x_ref);
        assert!(
            (params[0].values()[0] - x_ref).abs() < 1e-12,
            "diverged from scalar reference at step {step}"
        );
        let abs = params[0].values()[0].abs();
        if abs < 0.1 {
            reached_bottom = true;
        }
        if step >= 10 && !reached_bottom {
            if abs > prev_abs + 1e-12 {
                descent_monotone = false;
            }
            prev_abs = abs;
        }
    }
    assert!(reached_bottom, "never got below 0.1");
    assert!(descent_monotone, "|x| increased during the descent phase");
    assert!(params[0].values()[0].abs() < 0.5, "final x = {}", params[0].values()[0]);
}

#[test]
fn shape_mismatch_is_rejected() {
    let mut params = vec![Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap()];
    let mut state = AdamState::new(0.1, &params);
    assert!(state.step(&mut params, &[vec![1.0, 2.0, 3.0]]).is_err());
}
