use rand::Rng;

use super::activation::{relu_in_place, softmax_in_place};
use super::{ModelSpec, NnError};
use crate::dataset::Normalizer;

/// Lower clamp for log arguments in the cost; the upper clamp is `1 - LOG_CLAMP`.
pub const LOG_CLAMP: f64 = 1e-12;

/// One fully connected layer. `weights` is row-major `(outputs x inputs)`, so
/// row `j` holds the incoming edge weights of output unit `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    inputs: usize,
    outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    pub fn from_parts(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self, NnError> {
        if weights.len() != inputs * outputs || biases.len() != outputs {
            return Err(NnError::ShapeMismatch);
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            biases,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }

    fn same_shape(&self, other: &DenseLayer) -> bool {
        self.inputs == other.inputs && self.outputs == other.outputs
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases)
    }
}

/// Gradients of the cost, laid out exactly like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    /// Euclidean norm over every weight and bias gradient.
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(DenseLayer::values)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn matches(&self, params: &ModelParams) -> bool {
        self.layers.len() == params.layers.len()
            && self
                .layers
                .iter()
                .zip(&params.layers)
                .all(|(g, l)| g.same_shape(l))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: Vec<f64>,
}

/// One-hot row of length `classes` with a 1 at `label`.
pub fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut y = vec![0.0; classes];
    y[label] = 1.0;
    y
}

/// Weights, biases and the input normalizer of a trained network.
///
/// Immutable after training; `&ModelParams` can be shared between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layers: Vec<DenseLayer>,
    normalizer: Normalizer,
}

impl ModelParams {
    /// All weights and biases zero; identity normalizer.
    pub fn zeros(spec: &ModelSpec) -> Self {
        let layers = spec
            .layer_sizes()
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        Self {
            layers,
            normalizer: Normalizer::identity(spec.input_width()),
        }
    }

    /// He-style uniform initialization: weights in `±sqrt(6 / fan_in)`, zero
    /// biases.
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Self {
        let mut params = Self::zeros(spec);
        for layer in &mut params.layers {
            let limit = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        params
    }

    pub fn from_parts(layers: Vec<DenseLayer>, normalizer: Normalizer) -> Result<Self, NnError> {
        if layers.len() < 2 {
            return Err(NnError::InvalidSpec(
                "need at least two weight layers".into(),
            ));
        }
        if layers.windows(2).any(|w| w[0].outputs != w[1].inputs) {
            return Err(NnError::ShapeMismatch);
        }
        if normalizer.width() != layers[0].inputs {
            return Err(NnError::DimensionMismatch {
                expected: layers[0].inputs,
                found: normalizer.width(),
            });
        }
        if layers
            .iter()
            .flat_map(DenseLayer::values)
            .any(|v| !v.is_finite())
        {
            return Err(NnError::NonFinite(0));
        }
        Ok(Self { layers, normalizer })
    }

    pub fn spec(&self) -> ModelSpec {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        ModelSpec::new(sizes).expect("layers validated at construction")
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn set_normalizer(&mut self, normalizer: Normalizer) -> Result<(), NnError> {
        if normalizer.width() != self.input_width() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_width(),
                found: normalizer.width(),
            });
        }
        self.normalizer = normalizer;
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    /// Sum of squared edge weights (biases excluded).
    pub fn weight_penalty(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| &l.weights)
            .map(|w| w * w)
            .sum()
    }

    /// Copy with every stored value rounded to `f32`, the precision of the
    /// model file.
    pub fn quantized(&self) -> Self {
        let round = |v: &f64| (*v as f32) as f64;
        let layers = self
            .layers
            .iter()
            .map(|l| DenseLayer {
                inputs: l.inputs,
                outputs: l.outputs,
                weights: l.weights.iter().map(round).collect(),
                biases: l.biases.iter().map(round).collect(),
            })
            .collect();
        let normalizer = Normalizer::from_parts(
            self.normalizer.mean().iter().map(round).collect(),
            self.normalizer.std().iter().map(round).collect(),
        )
        .expect("rounding keeps stddev positive");
        Self { layers, normalizer }
    }

    /// Activations of every layer for an already-normalized input. Entry 0 is
    /// the input itself; the last entry is the softmax output.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, NnError> {
        if x.len() != self.input_width() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_width(),
                found: x.len(),
            });
        }
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(acts.last().expect("non-empty"));
            if i == last {
                softmax_in_place(&mut z);
            } else {
                relu_in_place(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    /// Output probabilities for an already-normalized input.
    pub fn output(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward(x)?.pop().expect("non-empty"))
    }

    /// Classifies raw sensor features: normalizes with the stored statistics,
    /// runs the network and picks the most probable class (lowest index on
    /// ties).
    pub fn predict(&self, raw_features: &[f64]) -> Result<Prediction, NnError> {
        if raw_features.len() != self.input_width() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_width(),
                found: raw_features.len(),
            });
        }
        let probabilities = self.output(&self.normalizer.apply(raw_features))?;
        Ok(Prediction {
            class: argmax(&probabilities),
            probabilities,
        })
    }

    /// Cost over a batch of normalized inputs with one-hot targets:
    /// mean per-unit binary cross-entropy plus `lambda / (2m)` times the sum of
    /// squared edge weights.
    pub fn loss(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        lambda: f64,
    ) -> Result<f64, NnError> {
        let labels = self.check_batch(inputs, targets)?;
        let rows: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        Ok(self.cost(&rows, &labels, lambda, false).0)
    }

    /// Analytic gradient of [`ModelParams::loss`] by backpropagation.
    pub fn backward(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        lambda: f64,
    ) -> Result<Gradients, NnError> {
        self.loss_and_gradients(inputs, targets, lambda)
            .map(|(_, g)| g)
    }

    pub fn loss_and_gradients(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        lambda: f64,
    ) -> Result<(f64, Gradients), NnError> {
        let labels = self.check_batch(inputs, targets)?;
        let rows: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let (loss, grads) = self.cost(&rows, &labels, lambda, true);
        Ok((loss, grads.expect("requested")))
    }

    fn check_batch(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
    ) -> Result<Vec<usize>, NnError> {
        if inputs.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(NnError::BatchLengthMismatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        for x in inputs {
            if x.len() != self.input_width() {
                return Err(NnError::DimensionMismatch {
                    expected: self.input_width(),
                    found: x.len(),
                });
            }
        }
        targets
            .iter()
            .enumerate()
            .map(|(i, y)| {
                if y.len() != self.classes() {
                    return Err(NnError::DimensionMismatch {
                        expected: self.classes(),
                        found: y.len(),
                    });
                }
                let ones = y.iter().filter(|&&v| v == 1.0).count();
                let zeros = y.iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || zeros != y.len() - 1 {
                    return Err(NnError::NotOneHot(i));
                }
                Ok(y.iter().position(|&v| v == 1.0).expect("one entry is 1"))
            })
            .collect()
    }

    /// Shared cost/gradient kernel over validated inputs and class labels.
    pub(crate) fn cost(
        &self,
        inputs: &[&[f64]],
        labels: &[usize],
        lambda: f64,
        with_grad: bool,
    ) -> (f64, Option<Gradients>) {
        let m = inputs.len() as f64;
        let mut total = 0.0;
        let mut grads = with_grad.then(|| Gradients::zeros_like(self));

        for (x, &label) in inputs.iter().zip(labels) {
            let acts = self.forward_unchecked(x);
            let h = acts.last().expect("non-empty");
            total += sample_cross_entropy(h, label);

            let Some(grads) = grads.as_mut() else {
                continue;
            };
            let mut delta = output_delta(h, label);
            for l in (0..self.layers.len()).rev() {
                let a_prev = &acts[l];
                let g = &mut grads.layers[l];
                for (j, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &mut g.weights[j * a_prev.len()..(j + 1) * a_prev.len()];
                    for (gw, a) in row.iter_mut().zip(a_prev) {
                        *gw += d * a;
                    }
                    g.biases[j] += d;
                }
                if l == 0 {
                    break;
                }
                let layer = &self.layers[l];
                let mut prev = vec![0.0; layer.inputs];
                for (j, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                // ReLU derivative, taken as 0 at the kink.
                for (p, a) in prev.iter_mut().zip(a_prev) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }

        let loss = total / m + lambda / (2.0 * m) * self.weight_penalty();
        if let Some(grads) = grads.as_mut() {
            for (g, layer) in grads.layers.iter_mut().zip(&self.layers) {
                for (gw, w) in g.weights.iter_mut().zip(&layer.weights) {
                    *gw = *gw / m + lambda / m * w;
                }
                for gb in &mut g.biases {
                    *gb /= m;
                }
            }
        }
        (loss, grads)
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate().skip(1) {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

fn clamp_log(v: f64) -> f64 {
    v.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP).ln()
}

fn unclamped(h: f64) -> bool {
    h > LOG_CLAMP && h < 1.0 - LOG_CLAMP
}

/// `-sum_k [y_k ln h_k + (1 - y_k) ln(1 - h_k)]` for a one-hot `y` at `label`.
fn sample_cross_entropy(h: &[f64], label: usize) -> f64 {
    h.iter()
        .enumerate()
        .map(|(k, &p)| {
            if k == label {
                -clamp_log(p)
            } else {
                -clamp_log(1.0 - p)
            }
        })
        .sum()
}

/// Gradient of the per-sample cost with respect to the output logits, through
/// the softmax Jacobian: `dz_j = h_j (g_j - sum_k g_k h_k)` where `g = dL/dh`.
fn output_delta(h: &[f64], label: usize) -> Vec<f64> {
    let g: Vec<f64> = h
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            if !unclamped(p) {
                0.0
            } else if k == label {
                -1.0 / p
            } else {
                1.0 / (1.0 - p)
            }
        })
        .collect();
    let dot: f64 = g.iter().zip(h).map(|(a, b)| a * b).sum();
    h.iter().zip(&g).map(|(p, gk)| p * (gk - dot)).collect()
}
