use super::mlp::{MlpGradients, MlpParameters};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Bias-corrected adaptive-moment state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: MlpParameters,
    pub second_moment: MlpParameters,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(params: &MlpParameters, learning_rate: f64) -> Self {
        Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
            learning_rate,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
        }
    }
}

/// One descent step on `params` along `grads`.
pub fn adam_step(params: &mut MlpParameters, grads: &MlpGradients, opt: &mut OptimizerState) {
    opt.step += 1;
    let (b1, b2) = (opt.beta1, opt.beta2);
    let c1 = 1.0 - b1.powi(opt.step as i32);
    let c2 = 1.0 - b2.powi(opt.step as i32);
    let lr = opt.learning_rate;
    let eps = opt.epsilon;
    let tensors = params
        .tensors_mut()
        .zip(grads.tensors())
        .zip(opt.first_moment.tensors_mut().zip(opt.second_moment.tensors_mut()));
    for ((p, g), (m, v)) in tensors {
        update_slice(p, g, m, v, lr, b1, b2, eps, c1, c2);
    }
}

/// Adam on a flat parameter slice with its own step counter, used for scalars
/// such as the log-temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarAdam {
    pub first_moment: f64,
    pub second_moment: f64,
    pub step: u64,
    pub learning_rate: f64,
}

impl ScalarAdam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            first_moment: 0.0,
            second_moment: 0.0,
            step: 0,
            learning_rate,
        }
    }

    pub fn step(&mut self, value: &mut f64, grad: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step as i32);
        let c2 = 1.0 - BETA2.powi(self.step as i32);
        let mut p = [*value];
        let mut m = [self.first_moment];
        let mut v = [self.second_moment];
        update_slice(&mut p, &[grad], &mut m, &mut v, self.learning_rate, BETA1, BETA2, EPSILON, c1, c2);
        *value = p[0];
        self.first_moment = m[0];
        self.second_moment = v[0];
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    c1: f64,
    c2: f64,
) {
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn scalar_net(value: f64) -> MlpParameters {
        let mut p = MlpParameters::zeros(&[1, 1], Activation::Selu);
        p.layers[0].weights[[0, 0]] = value;
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = scalar_net(0.3);
        let g = p.zeros_like();
        let mut opt = OptimizerState::new(&p, 1e-3);
        adam_step(&mut p, &g, &mut opt);
        assert_eq!(p, scalar_net(0.3));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar_net(0.0);
        let mut g = p.zeros_like();
        g.layers[0].weights[[0, 0]] = 1.0;
        let mut opt = OptimizerState::new(&p, 1e-3);
        adam_step(&mut p, &g, &mut opt);
        assert!((p.layers[0].weights[[0, 0]] + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn updates_decay_after_gradient_stops() {
        // Recurrence: m_t = 0.9^(t-1)·0.1, v_t = 0.999^(t-1)·0.001 after a unit gradient at t = 1.
        let mut p = scalar_net(0.0);
        let mut g = p.zeros_like();
        g.layers[0].weights[[0, 0]] = 1.0;
        let mut opt = OptimizerState::new(&p, 1e-3);
        adam_step(&mut p, &g, &mut opt);
        let zero = p.zeros_like();
        let mut prev = p.layers[0].weights[[0, 0]];
        let mut deltas = vec![prev.abs()];
        for t in 2..=3 {
            adam_step(&mut p, &zero, &mut opt);
            let cur = p.layers[0].weights[[0, 0]];
            let m_hat = 0.9f64.powi(t - 1) * 0.1 / (1.0 - 0.9f64.powi(t));
            let v_hat = 0.999f64.powi(t - 1) * 0.001 / (1.0 - 0.999f64.powi(t));
            let expected = 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
            assert!(((prev - cur) - expected).abs() < 1e-15);
            deltas.push((prev - cur).abs());
            prev = cur;
        }
        assert!(deltas[1] < deltas[0] && deltas[2] < deltas[1]);
    }

    #[test]
    fn scalar_adam_matches_network_adam() {
        let mut p = scalar_net(0.5);
        let mut opt = OptimizerState::new(&p, 3e-4);
        let mut s = 0.5;
        let mut sopt = ScalarAdam::new(3e-4);
        for k in 0..5 {
            let grad = 0.3 * k as f64 - 0.4;
            let mut g = p.zeros_like();
            g.layers[0].weights[[0, 0]] = grad;
            adam_step(&mut p, &g, &mut opt);
            sopt.step(&mut s, grad);
        }
        assert_eq!(p.layers[0].weights[[0, 0]], s);
    }
}
