//! Small fully connected classifier trained by mini-batch gradient descent.
//!
//! The default architecture is 13 -> 20 -> 17 -> 4: thirteen beacon RSSI
//! inputs, two hidden layers and one softmax output per zone.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{ClassificationDataset, Zone};
use crate::rng;

pub const DEFAULT_LAYERS: [usize; 4] = [13, 20, 17, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// One affine layer; `weights[o][i]` connects input `i` to output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { weights: vec![vec![0.0; n_in]; n_out], bias: vec![0.0; n_out] }
    }

    fn n_in(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn n_out(&self) -> usize {
        self.bias.len()
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Per-feature affine input transform `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Column means and population standard deviations; constant columns
    /// get scale 1.
    pub fn fit(features: &[Vec<f64>]) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let f = features[0].len();
        let mut mean = vec![0.0; f];
        for row in features {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut scale = vec![0.0; f];
        for row in features {
            for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scale {
            *s = (*s / n as f64).sqrt();
            if *s <= 1e-12 {
                *s = 1.0;
            }
        }
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub hidden: Activation,
    pub standardizer: Option<Standardizer>,
}

/// Same shape as [`MlpModel::layers`].
pub type Gradients = Vec<Layer>;

struct Pass {
    /// Layer inputs; `inputs[0]` is the (standardized) sample.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
}

impl MlpModel {
    /// He-initialized network with the given layer sizes and zero biases.
    pub fn new(sizes: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid("layers", "need at least two non-empty layers"));
        }
        let mut r = rng::seeded(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let sd = (2.0 / w[0] as f64).sqrt();
                let mut l = Layer::zeros(w[0], w[1]);
                for row in &mut l.weights {
                    for v in row.iter_mut() {
                        let g: f64 = StandardNormal.sample(&mut r);
                        *v = sd * g;
                    }
                }
                l
            })
            .collect();
        Ok(Self { layers, hidden, standardizer: None })
    }

    pub fn default_architecture(seed: u64) -> Self {
        Self::new(&DEFAULT_LAYERS, Activation::Relu, seed).expect("valid default layers")
    }

    pub fn zeros(sizes: &[usize], hidden: Activation) -> Self {
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Self { layers, hidden, standardizer: None }
    }

    pub fn with_standardizer(mut self, s: Standardizer) -> Self {
        self.standardizer = Some(s);
        self
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.n_inputs()];
        s.extend(self.layers.iter().map(Layer::n_out));
        s
    }

    pub fn n_inputs(&self) -> usize {
        self.layers.first().map_or(0, Layer::n_in)
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, Layer::n_out)
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.n_out() * (l.n_in() + 1)).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.n_inputs()
            )));
        }
        Ok(())
    }

    fn pass(&self, x: &[f64]) -> Pass {
        let x0 = match &self.standardizer {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        };
        let mut inputs = vec![x0];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&inputs[i]);
            if i + 1 < self.layers.len() {
                inputs.push(z.iter().map(|&v| self.hidden.apply(v)).collect());
            }
            pre.push(z);
        }
        Pass { inputs, pre }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.pass(x).pre.pop().unwrap_or_default())
    }

    /// Cross-entropy of one sample against class `label`.
    pub fn sample_loss(&self, x: &[f64], label: usize) -> Result<f64> {
        let z = self.logits(x)?;
        Ok(log_sum_exp(&z) - z[label])
    }

    /// Mean cross-entropy over a batch.
    pub fn loss(&self, xs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(labels) {
            total += self.sample_loss(x, y)?;
        }
        Ok(total / xs.len() as f64)
    }

    /// Backpropagates one sample; returns the error signal at the input and
    /// accumulates parameter gradients scaled by `weight`.
    fn backward(&self, x: &[f64], label: usize, weight: f64, grads: Option<&mut Gradients>) -> Vec<f64> {
        let pass = self.pass(x);
        let last = self.layers.len() - 1;
        let mut delta = softmax(&pass.pre[last]);
        delta[label] -= 1.0;
        let mut grads = grads;
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            if let Some(g) = grads.as_deref_mut() {
                let input = &pass.inputs[l];
                for (o, d) in delta.iter().enumerate() {
                    g[l].bias[o] += weight * d;
                    for (gw, v) in g[l].weights[o].iter_mut().zip(input) {
                        *gw += weight * d * v;
                    }
                }
            }
            let mut back = vec![0.0; layer.n_in()];
            for (row, d) in layer.weights.iter().zip(&delta) {
                for (b, w) in back.iter_mut().zip(row) {
                    *b += w * d;
                }
            }
            if l > 0 {
                for (b, z) in back.iter_mut().zip(&pass.pre[l - 1]) {
                    *b *= self.hidden.derivative(*z);
                }
            }
            delta = back;
        }
        delta
    }

    /// Gradient of the mean batch cross-entropy with respect to every weight
    /// and bias.
    pub fn gradients(&self, xs: &[Vec<f64>], labels: &[usize]) -> Result<Gradients> {
        if xs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if xs.len() != labels.len() {
            return Err(Error::LengthMismatch { expected: xs.len(), got: labels.len() });
        }
        let mut g: Gradients = self.layers.iter().map(|l| Layer::zeros(l.n_in(), l.n_out())).collect();
        let w = 1.0 / xs.len() as f64;
        for (x, &y) in xs.iter().zip(labels) {
            self.check_input(x)?;
            self.check_label(y)?;
            self.backward(x, y, w, Some(&mut g));
        }
        Ok(g)
    }

    /// Gradient of the sample cross-entropy with respect to the raw input.
    pub fn input_gradient(&self, x: &[f64], label: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_label(label)?;
        let mut g = self.backward(x, label, 0.0, None);
        if let Some(s) = &self.standardizer {
            for (v, sc) in g.iter_mut().zip(&s.scale) {
                *v /= sc;
            }
        }
        Ok(g)
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.n_outputs() {
            return Err(Error::ShapeMismatch(format!("label {label} but only {} outputs", self.n_outputs())));
        }
        Ok(())
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        for (layer, gl) in self.layers.iter_mut().zip(g) {
            for (row, grow) in layer.weights.iter_mut().zip(&gl.weights) {
                for (w, d) in row.iter_mut().zip(grow) {
                    *w -= lr * d;
                }
            }
            for (b, d) in layer.bias.iter_mut().zip(&gl.bias) {
                *b -= lr * d;
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Zone> {
        let p = mlp_forward(self, x)?;
        let best = argmax(&p);
        Zone::from_index(best).ok_or_else(|| Error::ShapeMismatch(format!("class {best} is not a zone")))
    }

    pub fn accuracy(&self, ds: &ClassificationDataset) -> Result<f64> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut hits = 0usize;
        for (x, z) in ds.features.iter().zip(&ds.zones) {
            if argmax(&mlp_forward(self, x)?) == z.index() {
                hits += 1;
            }
        }
        Ok(hits as f64 / ds.len() as f64)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Class probabilities for one input row.
pub fn mlp_forward(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&model.logits(x)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { lr: 0.01, batch_size: 10, epochs: 100, seed: rng::DEFAULT_SEED }
    }
}

/// Accuracy after each epoch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub train_accuracy: Vec<f64>,
    /// Empty when no held-out set was given.
    pub test_accuracy: Vec<f64>,
    pub train_loss: Vec<f64>,
}

/// Mini-batch gradient descent on mean cross-entropy. Epoch `e` shuffles
/// the rows with substream `e` of the seed.
pub fn mlp_train(
    model: &MlpModel,
    train: &ClassificationDataset,
    test: Option<&ClassificationDataset>,
    params: &TrainParams,
) -> Result<(MlpModel, TrainTrace)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(params.lr >= 0.0 && params.lr.is_finite()) {
        return Err(Error::invalid("lr", "must be finite and non-negative"));
    }
    if params.batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be at least 1"));
    }
    let labels: Vec<usize> = train.zones.iter().map(|z| z.index()).collect();
    let mut m = model.clone();
    let mut trace = TrainTrace::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng::substream(params.seed, epoch as u64));
        for chunk in order.chunks(params.batch_size) {
            let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| train.features[i].clone()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let g = m.gradients(&xs, &ys)?;
            m.step(&g, params.lr);
        }
        trace.train_accuracy.push(m.accuracy(train)?);
        trace.train_loss.push(m.loss(&train.features, &labels)?);
        if let Some(t) = test {
            trace.test_accuracy.push(m.accuracy(t)?);
        }
    }
    Ok((m, trace))
}
