use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Selu,
    Silu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
                }
            }
            Activation::Silu => x / (1.0 + (-x).exp()),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp()
                }
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 + x * (1.0 - s))
            }
        }
    }

    pub(crate) fn tag(self) -> u32 {
        match self {
            Activation::Selu => 0,
            Activation::Silu => 1,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Activation::Selu),
            1 => Some(Activation::Silu),
            _ => None,
        }
    }
}

/// Affine layer `y = W·x + b` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Fully connected network: activation after every hidden layer, linear output.
///
/// The same type holds gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParameters {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

pub type MlpGradients = MlpParameters;

/// Intermediate values of a batched forward pass, consumed by `backward`.
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    preacts: Vec<Array2<f64>>,
}

impl MlpParameters {
    /// LeCun-normal weights (`std = 1/sqrt(fan_in)`), zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, 1.0 / (fan_in.max(1) as f64).sqrt()).unwrap();
                Dense {
                    weights: Array2::from_shape_fn((fan_out, fan_in), |_| normal.sample(rng)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self { layers, activation }
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                weights: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self { layers, activation }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes(), self.activation)
    }

    /// Layer widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(Dense::outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Dense::outputs).unwrap_or(0)
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Every weight and bias tensor as a flat slice, layer by layer.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weights.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weights.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_dim("network input", self.input_dim(), input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let (out, _) = self.forward_batch(x);
        Ok(out.into_raw_vec_and_offset().0)
    }

    /// Batched forward pass; rows are samples.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> (Array2<f64>, ForwardCache) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights.t());
            z += &layer.bias;
            inputs.push(a);
            if i == last {
                preacts.push(Array2::zeros((0, 0)));
                return (z, ForwardCache { inputs, preacts });
            }
            let act = self.activation;
            a = z.mapv(|v| act.apply(v));
            preacts.push(z);
        }
        unreachable!("network has at least one layer")
    }

    /// Reverse pass for `Σ_rows output·upstream`. Returns parameter gradients
    /// summed over the batch and the gradient with respect to the input rows.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> (MlpGradients, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let weights = standard_layout(delta.t().dot(&cache.inputs[i]));
            let bias = delta.sum_axis(Axis(0));
            grads.push(Dense { weights, bias });
            let mut back = delta.dot(&layer.weights);
            if i > 0 {
                let act = self.activation;
                back.zip_mut_with(&cache.preacts[i - 1], |d, &z| *d *= act.derivative(z));
            }
            delta = back;
        }
        grads.reverse();
        (
            MlpParameters {
                layers: grads,
                activation: self.activation,
            },
            delta,
        )
    }

    /// Reverse pass that only propagates to the input, skipping parameter gradients.
    pub fn input_gradient(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Array2<f64> {
        let mut delta = upstream.to_owned();
        for i in (0..self.layers.len()).rev() {
            let mut back = delta.dot(&self.layers[i].weights);
            if i > 0 {
                let act = self.activation;
                back.zip_mut_with(&cache.preacts[i - 1], |d, &z| *d *= act.derivative(z));
            }
            delta = back;
        }
        delta
    }

    /// Single-sample gradient of `output·upstream` with respect to every
    /// parameter and the input.
    pub fn gradients(&self, input: &[f64], upstream: &[f64]) -> Result<(MlpGradients, Vec<f64>)> {
        check_dim("network input", self.input_dim(), input.len())?;
        check_dim("upstream gradient", self.output_dim(), upstream.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let u = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row vector");
        let (_, cache) = self.forward_batch(x);
        let (g, dx) = self.backward(&cache, u);
        Ok((g, dx.into_raw_vec_and_offset().0))
    }

    /// `self ← tau·online + (1 - tau)·self`.
    pub fn polyak_from(&mut self, online: &MlpParameters, tau: f64) {
        for (t, o) in self.tensors_mut().zip(online.tensors()) {
            for (tv, ov) in t.iter_mut().zip(o) {
                *tv = tau * ov + (1.0 - tau) * *tv;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn max_abs_diff(&self, other: &MlpParameters) -> f64 {
        self.tensors()
            .zip(other.tensors())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

fn standard_layout(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Input/hidden/output widths for a network with `hidden_layers` equal layers.
pub fn topology(input: usize, hidden_width: usize, hidden_layers: usize, output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend(std::iter::repeat_n(hidden_width, hidden_layers));
    sizes.push(output);
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = MlpParameters::zeros(&[3, 5, 5, 5, 2], Activation::Selu);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn selu_branches() {
        assert!((Activation::Selu.apply(1.0) - 1.0507).abs() < 1e-4);
        assert!((Activation::Selu.apply(-1e3) + 1.7581).abs() < 1e-4);
        assert_eq!(Activation::Selu.apply(0.0), 0.0);
    }

    #[test]
    fn single_path_selu_network() {
        let mut net = MlpParameters::zeros(&[1, 1, 1], Activation::Selu);
        net.layers[0].weights[[0, 0]] = 1.0;
        net.layers[1].weights[[0, 0]] = 1.0;
        let y = net.forward(&[1.0]).unwrap();
        assert!((y[0] - SELU_LAMBDA).abs() < 1e-15);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = MlpParameters::new(&[4, 8, 8, 2], Activation::Selu, &mut rng);
        let (g, dx) = net.gradients(&[0.1, 0.2, -0.3, 0.4], &[0.0, 0.0]).unwrap();
        assert!(g.tensors().all(|t| t.iter().all(|&v| v == 0.0)));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = MlpParameters::new(&[3, 2], Activation::Selu, &mut rng);
        let x = [0.5, -1.0, 2.0];
        let u = [1.5, -0.25];
        let (g, dx) = net.gradients(&x, &u).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(g.layers[0].weights[[o, i]], u[o] * x[i]);
            }
            assert_eq!(g.layers[0].bias[o], u[o]);
        }
        for i in 0..3 {
            let expect = u[0] * net.layers[0].weights[[0, i]] + u[1] * net.layers[0].weights[[1, i]];
            assert!((dx[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_backward_sums_sample_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = MlpParameters::new(&[3, 6, 2], Activation::Silu, &mut rng);
        let xs = ndarray::array![[0.1, 0.2, 0.3], [-0.5, 0.4, 1.0]];
        let us = ndarray::array![[1.0, 0.0], [0.5, -2.0]];
        let (_, cache) = net.forward_batch(xs.view());
        let (g, _) = net.backward(&cache, us.view());
        let (g0, _) = net.gradients(&[0.1, 0.2, 0.3], &[1.0, 0.0]).unwrap();
        let (g1, _) = net.gradients(&[-0.5, 0.4, 1.0], &[0.5, -2.0]).unwrap();
        for ((a, b), c) in g.tensors().zip(g0.tensors()).zip(g1.tensors()) {
            for k in 0..a.len() {
                assert!((a[k] - b[k] - c[k]).abs() < 1e-12);
            }
        }
    }

    fn scalar_objective(net: &MlpParameters, x: &[f64], u: &[f64]) -> f64 {
        net.forward(x).unwrap().iter().zip(u).map(|(y, w)| y * w).sum()
    }

    fn relative_error(analytic: f64, numeric: f64) -> f64 {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-5;
        for (seed, act) in [(0, Activation::Selu), (1, Activation::Selu), (2, Activation::Silu), (3, Activation::Selu), (4, Activation::Silu)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = MlpParameters::new(&[4, 8, 8, 8, 2], act, &mut rng);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (g, dx) = net.gradients(&x, &u).unwrap();
            let mut worst = 0.0f64;
            let mut probe = net.clone();
            let flat: Vec<Vec<f64>> = g.tensors().map(<[f64]>::to_vec).collect();
            for (ti, grads) in flat.iter().enumerate() {
                for k in 0..grads.len() {
                    let orig = probe.tensors().nth(ti).unwrap()[k];
                    probe.tensors_mut().nth(ti).unwrap()[k] = orig + h;
                    let fp = scalar_objective(&probe, &x, &u);
                    probe.tensors_mut().nth(ti).unwrap()[k] = orig - h;
                    let fm = scalar_objective(&probe, &x, &u);
                    probe.tensors_mut().nth(ti).unwrap()[k] = orig;
                    worst = worst.max(relative_error(grads[k], (fp - fm) / (2.0 * h)));
                }
            }
            for k in 0..x.len() {
                let mut xp = x.clone();
                xp[k] += h;
                let mut xm = x.clone();
                xm[k] -= h;
                let numeric = (scalar_objective(&net, &xp, &u) - scalar_objective(&net, &xm, &u)) / (2.0 * h);
                worst = worst.max(relative_error(dx[k], numeric));
            }
            assert!(worst < 1e-4, "seed {seed}: relative error {worst}");
        }
    }

    #[test]
    fn input_gradient_matches_full_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = MlpParameters::new(&[3, 5, 5, 2], Activation::Selu, &mut rng);
        let xs = ndarray::array![[0.3, -0.2, 0.9], [1.0, 0.5, -0.5]];
        let us = ndarray::array![[1.0, 2.0], [-1.0, 0.5]];
        let (_, cache) = net.forward_batch(xs.view());
        let (_, full) = net.backward(&cache, us.view());
        assert_eq!(net.input_gradient(&cache, us.view()), full);
    }

    #[test]
    fn same_seed_same_initialisation() {
        let a = MlpParameters::new(&[4, 8, 2], Activation::Selu, &mut ChaCha8Rng::seed_from_u64(9));
        let b = MlpParameters::new(&[4, 8, 2], Activation::Selu, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn polyak_contracts_toward_online() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let online = MlpParameters::new(&[2, 4, 1], Activation::Selu, &mut rng);
        let mut target = MlpParameters::new(&[2, 4, 1], Activation::Selu, &mut rng);
        let d0 = target.max_abs_diff(&online);
        for _ in 0..10 {
            target.polyak_from(&online, 0.005);
        }
        let d10 = target.max_abs_diff(&online);
        assert!((d10 / d0 - 0.995f64.powi(10)).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = MlpParameters::zeros(&[3, 2], Activation::Selu);
        assert!(net.forward(&[1.0]).is_err());
        assert!(net.gradients(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }
}
