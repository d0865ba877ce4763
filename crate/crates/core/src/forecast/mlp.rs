use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ForecastError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Per-feature min-max bounds for inputs and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    pub output_min: Vec<f64>,
    pub output_max: Vec<f64>,
}

fn column_bounds(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = rows[0].len();
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    (lo, hi)
}

fn span(lo: f64, hi: f64) -> f64 {
    if hi - lo > 1e-12 {
        hi - lo
    } else {
        1.0
    }
}

impl Normalization {
    pub fn fit(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Self {
        assert!(
            !inputs.is_empty() && !targets.is_empty(),
            "cannot fit bounds on nothing"
        );
        let (input_min, input_max) = column_bounds(inputs);
        let (output_min, output_max) = column_bounds(targets);
        Self {
            input_min,
            input_max,
            output_min,
            output_max,
        }
    }

    /// Maps raw inputs into [0, 1], clamping values outside the fitted range.
    pub fn input(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(j, &v)| {
                let (lo, hi) = (self.input_min[j], self.input_max[j]);
                ((v - lo) / span(lo, hi)).clamp(0.0, 1.0)
            })
            .collect()
    }

    pub fn target(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(j, &v)| {
                let (lo, hi) = (self.output_min[j], self.output_max[j]);
                (v - lo) / span(lo, hi)
            })
            .collect()
    }

    pub fn output(&self, normalized: &[f64]) -> Vec<f64> {
        normalized
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let (lo, hi) = (self.output_min[j], self.output_max[j]);
                v * span(lo, hi) + lo
            })
            .collect()
    }
}

/// Fully connected network: activation on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    /// One row-major `out × in` matrix per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    pub activation: Activation,
    pub normalization: Option<Normalization>,
}

/// Gradient of the loss with the same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    /// Training-set MSE; index 0 is before the first epoch.
    pub mse: Vec<f64>,
    /// Held-out MSE per epoch, empty when no validation set was given.
    pub validation: Vec<f64>,
    pub best_epoch: usize,
    pub final_lr: f64,
}

impl TrainingTrace {
    pub fn initial(&self) -> f64 {
        self.mse[0]
    }

    pub fn best(&self) -> f64 {
        self.mse[self.best_epoch]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Epochs without improvement before the learning rate is halved.
    pub patience: usize,
    /// L2 shrinkage on hidden-layer weights (not biases or the linear
    /// output layer), applied on every step.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Mlp {
    /// Uniform initialisation in ±1/√fan_in.
    pub fn new(layer_sizes: &[usize], activation: Activation, seed: u64) -> Self {
        assert!(layer_sizes.len() >= 2, "need input and output layers");
        assert!(
            layer_sizes.iter().all(|&n| n > 0),
            "layers must be non-empty"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let r = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-r..r))
                    .collect(),
            );
            biases.push((0..fan_out).map(|_| rng.random_range(-r..r)).collect());
        }
        Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation,
            normalization: None,
        }
    }

    /// Builds a network from explicit parameters.
    pub fn from_parameters(
        layer_sizes: &[usize],
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        activation: Activation,
    ) -> Result<Self, ForecastError> {
        let n_layers = layer_sizes.len().saturating_sub(1);
        if n_layers == 0 || weights.len() != n_layers || biases.len() != n_layers {
            return Err(ForecastError::ShapeMismatch {
                expected: n_layers,
                got: weights.len(),
            });
        }
        for (l, w) in layer_sizes.windows(2).enumerate() {
            if weights[l].len() != w[0] * w[1] {
                return Err(ForecastError::ShapeMismatch {
                    expected: w[0] * w[1],
                    got: weights[l].len(),
                });
            }
            if biases[l].len() != w[1] {
                return Err(ForecastError::ShapeMismatch {
                    expected: w[1],
                    got: biases[l].len(),
                });
            }
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation,
            normalization: None,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_len(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Parameters flattened as all weight matrices, then all bias vectors.
    pub fn parameters(&self) -> Vec<f64> {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .copied()
            .collect()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_parameters(), "parameter count");
        let mut it = flat.iter();
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for p in v.iter_mut() {
                *p = *it.next().expect("length checked");
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .all(|p| p.is_finite())
    }

    /// Activations of every layer, input included.
    fn trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let last = self.weights.len() - 1;
        let mut acts = vec![input.to_vec()];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let x = &acts[l];
            let n_in = x.len();
            let out: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(o, &bias)| {
                    let z = bias
                        + w[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(x)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    if l == last {
                        z
                    } else {
                        self.activation.apply(z)
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// Raw forward pass (no normalisation).
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, ForecastError> {
        if input.len() != self.input_len() {
            return Err(ForecastError::ShapeMismatch {
                expected: self.input_len(),
                got: input.len(),
            });
        }
        Ok(self.trace(input).pop().expect("output layer"))
    }

    /// Per-sample loss: mean over outputs of the squared error.
    fn sample_loss(&self, input: &[f64], target: &[f64]) -> f64 {
        let y = self.trace(input).pop().expect("output layer");
        y.iter()
            .zip(target)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / y.len() as f64
    }

    /// Mean over samples of the per-sample loss.
    pub fn mse(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
        inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| self.sample_loss(x, t))
            .sum::<f64>()
            / inputs.len() as f64
    }

    /// Backpropagated gradient of the per-sample loss.
    pub fn gradient(&self, input: &[f64], target: &[f64]) -> Gradients {
        let acts = self.trace(input);
        let n_layers = self.weights.len();
        let k = self.output_len() as f64;
        let mut delta: Vec<f64> = acts[n_layers]
            .iter()
            .zip(target)
            .map(|(y, t)| 2.0 * (y - t) / k)
            .collect();
        let mut gw = vec![Vec::new(); n_layers];
        let mut gb = vec![Vec::new(); n_layers];
        for l in (0..n_layers).rev() {
            let x = &acts[l];
            let n_in = x.len();
            gw[l] = delta
                .iter()
                .flat_map(|&d| x.iter().map(move |&xi| d * xi))
                .collect();
            gb[l] = delta.clone();
            if l > 0 {
                let w = &self.weights[l];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(o, d)| d * w[o * n_in + i])
                            .sum();
                        back * self.activation.slope(x[i])
                    })
                    .collect();
            }
        }
        Gradients {
            weights: gw,
            biases: gb,
        }
    }

    fn step(&mut self, g: &Gradients, lr: f64, decay: f64) {
        let last = self.weights.len() - 1;
        for (l, (p, d)) in self.weights.iter_mut().zip(&g.weights).enumerate() {
            let decay = if l < last { decay } else { 0.0 };
            p.iter_mut()
                .zip(d)
                .for_each(|(p, d)| *p -= lr * (d + decay * *p));
        }
        for (p, d) in self.biases.iter_mut().zip(&g.biases) {
            p.iter_mut().zip(d).for_each(|(p, d)| *p -= lr * d);
        }
    }

    /// Stochastic gradient descent over (already normalised) pairs with a
    /// seeded shuffle per epoch and learning-rate halving on plateaus. The
    /// best parameters seen are kept. On divergence the parameters from the
    /// start of the failing epoch are restored.
    pub fn train(
        &mut self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        params: TrainParams,
    ) -> Result<TrainingTrace, ForecastError> {
        self.train_validated(inputs, targets, None, params)
    }

    /// As [`Mlp::train`], but "best" and the plateau schedule are judged on
    /// the held-out pairs when given.
    pub fn train_validated(
        &mut self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        validation: Option<(&[Vec<f64>], &[Vec<f64>])>,
        params: TrainParams,
    ) -> Result<TrainingTrace, ForecastError> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(ForecastError::EmptyDataset);
        }
        if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
            return Err(ForecastError::InvalidLearningRate(params.learning_rate));
        }
        for (x, t) in inputs.iter().zip(targets) {
            if x.len() != self.input_len() {
                return Err(ForecastError::ShapeMismatch {
                    expected: self.input_len(),
                    got: x.len(),
                });
            }
            if t.len() != self.output_len() {
                return Err(ForecastError::ShapeMismatch {
                    expected: self.output_len(),
                    got: t.len(),
                });
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut lr = params.learning_rate;
        let score = |net: &Self, train_mse: f64| match validation {
            Some((vx, vt)) => net.mse(vx, vt),
            None => train_mse,
        };
        let initial = self.mse(inputs, targets);
        let mut mse = vec![initial];
        let mut val = Vec::new();
        let mut best = score(self, initial);
        if validation.is_some() {
            val.push(best);
        }
        let (mut best_epoch, mut best_params) = (0, self.parameters());
        let mut stale = 0;

        for epoch in 1..=params.epochs {
            let checkpoint = self.parameters();
            order.shuffle(&mut rng);
            for &i in &order {
                let g = self.gradient(&inputs[i], &targets[i]);
                self.step(&g, lr, params.weight_decay);
                if !self.all_finite() {
                    break;
                }
            }
            let e = self.mse(inputs, targets);
            if !e.is_finite() || !self.all_finite() {
                self.set_parameters(&checkpoint);
                return Err(ForecastError::DivergenceDetected { epoch });
            }
            mse.push(e);
            let v = score(self, e);
            if validation.is_some() {
                val.push(v);
            }
            if v < best {
                best = v;
                best_epoch = epoch;
                best_params = self.parameters();
                stale = 0;
            } else {
                stale += 1;
                if stale >= params.patience {
                    lr *= 0.5;
                    stale = 0;
                }
            }
        }
        self.set_parameters(&best_params);
        Ok(TrainingTrace {
            mse,
            validation: val,
            best_epoch,
            final_lr: lr,
        })
    }
}
