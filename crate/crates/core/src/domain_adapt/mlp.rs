use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Fully connected layer `y = act(x·W + b)` on row-major batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs × outputs`.
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

/// Multi-layer perceptron with manual backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Parameter gradients with the same shapes as an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weight: Vec<DMatrix<f64>>,
    pub bias: Vec<DVector<f64>>,
}

/// Activations saved by the forward pass; `values[0]` is the input.
#[derive(Debug, Clone)]
pub struct MlpCache {
    values: Vec<DMatrix<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.values.last().expect("cache holds the input")
    }
}

impl Mlp {
    /// Layer widths `sizes[0] → … → sizes[n]`. Hidden layers use `hidden`,
    /// the last layer uses `output`. Weights are Glorot-uniform, biases zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least one layer");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    weight: DMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..limit)),
                    bias: DVector::zeros(fan_out),
                    activation: if l + 1 == n { output } else { hidden },
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> MlpCache {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.clone());
        for layer in &self.layers {
            let mut z = values.last().unwrap() * &layer.weight;
            for mut row in z.row_iter_mut() {
                for (v, b) in row.iter_mut().zip(layer.bias.iter()) {
                    *v = layer.activation.apply(*v + b);
                }
            }
            values.push(z);
        }
        MlpCache { values }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward(x).values.pop().unwrap()
    }

    /// Gradients of a loss given `grad_out = ∂L/∂output`; also returns
    /// `∂L/∂input`.
    pub fn backward(&self, cache: &MlpCache, grad_out: &DMatrix<f64>) -> (MlpGrads, DMatrix<f64>) {
        let n = self.layers.len();
        let mut weight = vec![DMatrix::zeros(0, 0); n];
        let mut bias = vec![DVector::zeros(0); n];
        let mut upstream = grad_out.clone();
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let y = &cache.values[l + 1];
            let dz = upstream.zip_map(y, |g, y| g * layer.activation.derivative(y));
            weight[l] = cache.values[l].transpose() * &dz;
            bias[l] = dz.row_sum().transpose();
            upstream = dz * layer.weight.transpose();
        }
        (MlpGrads { weight, bias }, upstream)
    }

    /// `θ ← θ − lr·(g + weight_decay·θ)`, with decay on weights only.
    pub fn sgd_step(&mut self, grads: &MlpGrads, lr: f64, weight_decay: f64) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            layer.weight *= 1.0 - lr * weight_decay;
            layer.weight -= &grads.weight[l] * lr;
            layer.bias -= &grads.bias[l] * lr;
        }
    }

    /// Mutable view of parameter `k` in a fixed flattening order (per
    /// layer: weights column-major, then biases). Used by gradient checks.
    pub fn parameter_mut(&mut self, mut k: usize) -> &mut f64 {
        for layer in &mut self.layers {
            if k < layer.weight.len() {
                return &mut layer.weight.as_mut_slice()[k];
            }
            k -= layer.weight.len();
            if k < layer.bias.len() {
                return &mut layer.bias.as_mut_slice()[k];
            }
            k -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weight: mlp
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.weight.nrows(), l.weight.ncols()))
                .collect(),
            bias: mlp.layers.iter().map(|l| DVector::zeros(l.bias.len())).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weight.iter_mut().for_each(|w| *w *= s);
        self.bias.iter_mut().for_each(|b| *b *= s);
    }

    /// `self += s·other`.
    pub fn add_scaled(&mut self, other: &MlpGrads, s: f64) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b * s;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b * s;
        }
    }

    /// Entry `k` in the same order as [`Mlp::parameter_mut`].
    pub fn get(&self, mut k: usize) -> f64 {
        for (w, b) in self.weight.iter().zip(&self.bias) {
            if k < w.len() {
                return w.as_slice()[k];
            }
            k -= w.len();
            if k < b.len() {
                return b.as_slice()[k];
            }
            k -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn len(&self) -> usize {
        self.weight.iter().map(|w| w.len()).sum::<usize>() + self.bias.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mlp = Mlp::new(&[5, 7, 4, 2], Activation::Tanh, Activation::Sigmoid, &mut rng);
        let x = DMatrix::from_fn(6, 5, |_, _| rng.random_range(-1.0..1.0));
        let w = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        // L = Σ w ⊙ output
        let loss = |m: &Mlp| m.predict(&x).component_mul(&w).sum();
        let cache = mlp.forward(&x);
        let (grads, dx) = mlp.backward(&cache, &w);
        let h = 1e-5;
        for k in 0..mlp.parameter_count() {
            let orig = *mlp.parameter_mut(k);
            *mlp.parameter_mut(k) = orig + h;
            let up = loss(&mlp);
            *mlp.parameter_mut(k) = orig - h;
            let down = loss(&mlp);
            *mlp.parameter_mut(k) = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grads.get(k);
            assert!((fd - an).abs() <= 1e-6 + 1e-4 * fd.abs(), "param {k}: {an} vs {fd}");
        }
        let mut xp = x.clone();
        xp[(2, 3)] += h;
        let mut xm = x.clone();
        xm[(2, 3)] -= h;
        let fd = (mlp.predict(&xp).component_mul(&w).sum() - mlp.predict(&xm).component_mul(&w).sum()) / (2.0 * h);
        assert!((fd - dx[(2, 3)]).abs() < 1e-8);
    }

    #[test]
    fn sigmoid_output_is_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::new(&[3, 4, 1], Activation::Tanh, Activation::Sigmoid, &mut rng);
        let x = DMatrix::from_fn(20, 3, |_, _| rng.random_range(-5.0..5.0));
        assert!(mlp.predict(&x).iter().all(|&d| d > 0.0 && d < 1.0));
    }
}
