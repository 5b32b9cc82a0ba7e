//! Minimal dense networks with manual backprop, shared by the probing lab
//! and the layer-mixer training loop. Everything is f64 and seeded; repeated
//! runs produce identical parameters.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Per-layer parameter gradients: (dW, db) pairs in layer order.
pub type LayerGrads = Vec<(Array2<f64>, Array1<f64>)>;

/// Fully connected layer; `weight` is [out, in].
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    /// He-style init (for ReLU stacks).
    pub fn init_he(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = (2.0 / in_dim as f64).sqrt();
        Self::init_scaled(in_dim, out_dim, scale, rng)
    }

    /// Xavier-style init (for tanh stacks).
    pub fn init_xavier(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = (1.0 / in_dim as f64).sqrt();
        Self::init_scaled(in_dim, out_dim, scale, rng)
    }

    fn init_scaled(in_dim: usize, out_dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let weight =
            Array2::from_shape_fn((out_dim, in_dim), |_| scale * standard_normal(rng));
        Linear { weight, bias: Array1::zeros(out_dim) }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear { weight: Array2::zeros((out_dim, in_dim)), bias: Array1::zeros(out_dim) }
    }

    /// x: [batch, in] -> [batch, out]
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    /// Given upstream gradient [batch, out], return (dW, db, dX).
    pub fn backward(
        &self,
        x: &Array2<f64>,
        dout: &Array2<f64>,
    ) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
        let dw = dout.t().dot(x);
        let db = dout.sum_axis(Axis(0));
        let dx = dout.dot(&self.weight);
        (dw, db, dx)
    }

    pub fn sgd_step(&mut self, dw: &Array2<f64>, db: &Array1<f64>, lr: f64) {
        self.weight.scaled_add(-lr, dw);
        self.bias.scaled_add(-lr, db);
    }
}

/// Box-Muller standard normal; two uniform draws per sample keeps the
/// stream layout independent of the platform's float rounding.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: &mut Array2<f64>) {
        match self {
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => x.mapv_inplace(f64::tanh),
        }
    }

    /// Gradient through the activation given its *output* values.
    fn backprop(self, output: &Array2<f64>, dout: &mut Array2<f64>) {
        match self {
            Activation::Relu => {
                dout.zip_mut_with(output, |d, o| {
                    if *o <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            Activation::Tanh => {
                dout.zip_mut_with(output, |d, o| *d *= 1.0 - o * o);
            }
        }
    }
}

/// A stack of Linear layers with an activation between them (none after the
/// last layer).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    /// `dims` = [in, hidden..., out]; hidden layers use `init`, supplied per
    /// layer index.
    pub fn new(dims: &[usize], activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "mlp needs at least input and output dims");
        let layers = dims
            .windows(2)
            .map(|w| match activation {
                Activation::Relu => Linear::init_he(w[0], w[1], rng),
                Activation::Tanh => Linear::init_xavier(w[0], w[1], rng),
            })
            .collect();
        Mlp { layers, activation }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_cached(x).pop().unwrap()
    }

    /// All post-activation values per layer; last entry is the raw logits.
    pub fn forward_cached(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut outs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward(&cur);
            if i + 1 < self.layers.len() {
                self.activation.apply(&mut cur);
            }
            outs.push(cur.clone());
        }
        outs
    }

    /// Backprop from dlogits; returns per-layer (dW, db) and the gradient
    /// with respect to the input.
    pub fn backward(
        &self,
        x: &Array2<f64>,
        cached: &[Array2<f64>],
        dlogits: &Array2<f64>,
    ) -> (LayerGrads, Array2<f64>) {
        let mut grads = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); self.layers.len()];
        let mut dout = dlogits.clone();
        for i in (0..self.layers.len()).rev() {
            let input = if i == 0 { x } else { &cached[i - 1] };
            let (dw, db, mut dx) = self.layers[i].backward(input, &dout);
            grads[i] = (dw, db);
            if i > 0 {
                self.activation.backprop(&cached[i - 1], &mut dx);
            }
            dout = dx;
        }
        (grads, dout)
    }

    pub fn sgd_step(&mut self, grads: &[(Array2<f64>, Array1<f64>)], lr: f64) {
        for (layer, (dw, db)) in self.layers.iter_mut().zip(grads) {
            layer.sgd_step(dw, db, lr);
        }
    }
}

/// Numerically stable softmax over the last axis.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let batch = logits.nrows();
    assert_eq!(batch, labels.len());
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    for (i, label) in labels.iter().enumerate() {
        loss -= probs[[i, *label]].max(1e-300).ln();
    }
    loss /= batch as f64;
    let mut dlogits = probs;
    for (i, label) in labels.iter().enumerate() {
        dlogits[[i, *label]] -= 1.0;
    }
    dlogits.mapv_inplace(|v| v / batch as f64);
    (loss, dlogits)
}

/// Stable `-ln(sigmoid(x))` (softplus of -x).
pub fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded::rng_for;
    use ndarray::array;

    #[test]
    fn linear_forward_matches_hand_computation() {
        let layer = Linear {
            weight: array![[1.0, 2.0], [0.0, -1.0]],
            bias: array![0.5, -0.5],
        };
        let x = array![[1.0, 1.0]];
        let out = layer.forward(&x);
        assert_eq!(out, array![[3.5, -1.5]]);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = rng_for(9, &["nn", "grad"]);
        let mut logits = Array2::from_shape_fn((4, 3), |_| standard_normal(&mut rng));
        let labels = vec![0, 2, 1, 1];
        let (_, grad) = cross_entropy(&logits, &labels);
        let eps = 1e-6;
        for i in 0..4 {
            for j in 0..3 {
                let orig = logits[[i, j]];
                logits[[i, j]] = orig + eps;
                let (lp, _) = cross_entropy(&logits, &labels);
                logits[[i, j]] = orig - eps;
                let (lm, _) = cross_entropy(&logits, &labels);
                logits[[i, j]] = orig;
                let numeric = (lp - lm) / (2.0 * eps);
                assert!(
                    (numeric - grad[[i, j]]).abs() < 1e-6,
                    "({i},{j}): analytic {} vs numeric {numeric}",
                    grad[[i, j]]
                );
            }
        }
    }

    #[test]
    fn mlp_backward_gradient_check() {
        let mut rng = rng_for(11, &["nn", "mlp"]);
        let mut mlp = Mlp::new(&[3, 5, 2], Activation::Tanh, &mut rng);
        let x = Array2::from_shape_fn((6, 3), |_| standard_normal(&mut rng));
        let labels = vec![0, 1, 1, 0, 1, 0];

        let cached = mlp.forward_cached(&x);
        let (_, dlogits) = cross_entropy(cached.last().unwrap(), &labels);
        let (grads, _) = mlp.backward(&x, &cached, &dlogits);

        let eps = 1e-6;
        #[allow(clippy::needless_range_loop)]
        for layer_idx in 0..mlp.layers.len() {
            for flat in [0usize, 1, 2] {
                let (r, c) = (flat % mlp.layers[layer_idx].weight.nrows(), flat % mlp.layers[layer_idx].weight.ncols());
                let orig = mlp.layers[layer_idx].weight[[r, c]];
                mlp.layers[layer_idx].weight[[r, c]] = orig + eps;
                let (lp, _) = cross_entropy(&mlp.forward(&x), &labels);
                mlp.layers[layer_idx].weight[[r, c]] = orig - eps;
                let (lm, _) = cross_entropy(&mlp.forward(&x), &labels);
                mlp.layers[layer_idx].weight[[r, c]] = orig;
                let numeric = (lp - lm) / (2.0 * eps);
                let analytic = grads[layer_idx].0[[r, c]];
                assert!(
                    (numeric - analytic).abs() < 1e-6,
                    "layer {layer_idx} ({r},{c}): {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = rng_for(5, &["nn", "softmax"]);
        let logits = Array2::from_shape_fn((8, 5), |_| 10.0 * standard_normal(&mut rng));
        let probs = softmax_rows(&logits);
        for row in probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn neg_log_sigmoid_is_stable_and_exact_at_zero() {
        assert!((neg_log_sigmoid(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(neg_log_sigmoid(800.0) < 1e-300);
        assert!(neg_log_sigmoid(-800.0) > 700.0);
    }
}
