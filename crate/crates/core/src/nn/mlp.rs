//! Fully connected ReLU network with a softmax head, trained by mini-batch
//! Adam on mean cross-entropy.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{Matrix, Scaler};

/// Default hidden layer widths.
pub const HIDDEN: [usize; 2] = [128, 200];

/// RNG algorithm used for initialization and per-epoch shuffling.
pub const RNG_NAME: &str = "chacha8";

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageTag {
    /// VOID (class 1) vs non-VOID (class 0)
    Stage1,
    /// ABD (class 0) vs DO (class 1)
    Stage2,
    /// ABD / DO / VOID
    Single,
    Generic,
}

impl fmt::Display for StageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageTag::Stage1 => "stage1",
            StageTag::Stage2 => "stage2",
            StageTag::Single => "single",
            StageTag::Generic => "generic",
        })
    }
}

impl FromStr for StageTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "stage1" => Ok(StageTag::Stage1),
            "stage2" => Ok(StageTag::Stage2),
            "single" => Ok(StageTag::Single),
            "generic" => Ok(StageTag::Generic),
            _ => Err(format!("unknown stage tag {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 50,
            batch_size: 128,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.epochs >= 1
            && self.batch_size >= 1
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out × n_in`, row-major: row `o` holds the weights into neuron `o`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, slot) in out.iter_mut().enumerate() {
            let w = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            *slot = self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub scaler: Scaler,
    /// Width of the feature vectors the model is applied to.
    pub source_dim: usize,
    /// Columns of the source vector fed to the input layer, in order.
    pub feature_index: Vec<usize>,
    pub stage: StageTag,
    pub seed: u64,
    pub config: TrainConfig,
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Per-layer gradients, same shapes as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl MlpModel {
    /// All-zero network over `dims` (input, hidden..., classes).
    pub fn zeros(dims: &[usize], stage: StageTag) -> Self {
        assert!(dims.len() >= 2, "need at least input and output widths");
        Self {
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            scaler: Scaler::identity(dims[0]),
            source_dim: dims[0],
            feature_index: (0..dims[0]).collect(),
            stage,
            seed: 0,
            config: TrainConfig::default(),
        }
    }

    /// Weights uniform in `±√(6 / fan_in)`, biases zero, from a seeded RNG.
    pub fn new(dims: &[usize], stage: StageTag, seed: u64) -> Self {
        let mut model = Self::zeros(dims, stage);
        model.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        for layer in &mut model.layers {
            let bound = (6.0 / layer.n_in as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        model
    }

    /// Standard architecture `[input, 128, 200, classes]`.
    pub fn standard(input: usize, classes: usize, stage: StageTag, seed: u64) -> Self {
        Self::new(&[input, HIDDEN[0], HIDDEN[1], classes], stage, seed)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].n_in];
        d.extend(self.layers.iter().map(|l| l.n_out));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Forward pass on an already-scaled input-layer vector.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.n_out];
            layer.affine(&a, &mut z);
            if k + 1 < self.layers.len() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        softmax(&a)
    }

    /// Selects the model's input columns from full-width rows.
    fn project(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.source_dim {
            return Err(Error::DimensionMismatch {
                expected: self.source_dim,
                actual: m.cols(),
            });
        }
        if self.feature_index.len() == self.source_dim
            && self.feature_index.iter().enumerate().all(|(i, &j)| i == j)
        {
            Ok(m.clone())
        } else {
            Ok(m.select_cols(&self.feature_index))
        }
    }

    /// Scales raw rows with the model's scaler, then runs the network.
    pub fn predict_proba(&self, raw: &Matrix) -> Result<Vec<Vec<f64>>> {
        let x = self.scaler.transform(&self.project(raw)?)?;
        Ok(x.iter_rows().map(|r| self.forward(r)).collect())
    }

    /// Argmax class per row; ties go to the lower class index.
    pub fn predict(&self, raw: &Matrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(raw)?.iter().map(|p| argmax(p)).collect())
    }

    /// Mean cross-entropy and its gradient over rows `idx` of a scaled
    /// input matrix.
    pub fn loss_and_gradients(&self, x: &Matrix, labels: &[usize], idx: &[usize]) -> (f64, Gradients) {
        let mut grads = Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        };
        let n_layers = self.layers.len();
        let scale = 1.0 / idx.len() as f64;
        let mut loss = 0.0;
        // activations[k] is the input to layer k
        let mut activations: Vec<Vec<f64>> = vec![Vec::new(); n_layers + 1];
        for &i in idx {
            activations[0].clear();
            activations[0].extend_from_slice(x.row(i));
            for (k, layer) in self.layers.iter().enumerate() {
                let mut z = vec![0.0; layer.n_out];
                layer.affine(&activations[k], &mut z);
                if k + 1 < n_layers {
                    z.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                activations[k + 1] = z;
            }
            let p = softmax(&activations[n_layers]);
            let y = labels[i];
            loss += -p[y].max(f64::MIN_POSITIVE).ln();

            let mut delta: Vec<f64> = p;
            delta[y] -= 1.0;
            for k in (0..n_layers).rev() {
                let layer = &self.layers[k];
                let input = &activations[k];
                let gw = &mut grads.weights[k];
                let gb = &mut grads.bias[k];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let ds = d * scale;
                    gb[o] += ds;
                    let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += ds * a;
                    }
                }
                if k > 0 {
                    let mut next = vec![0.0; layer.n_in];
                    for (o, d) in delta.iter().enumerate() {
                        if *d == 0.0 {
                            continue;
                        }
                        let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                        for (n, w) in next.iter_mut().zip(row) {
                            *n += d * w;
                        }
                    }
                    // ReLU gate: the stored activation is positive iff z > 0
                    for (n, a) in next.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *n = 0.0;
                        }
                    }
                    delta = next;
                }
            }
        }
        (loss * scale, grads)
    }

    /// Mean cross-entropy over all rows of a scaled matrix.
    pub fn loss(&self, x: &Matrix, labels: &[usize]) -> f64 {
        let total: f64 = x
            .iter_rows()
            .zip(labels)
            .map(|(r, &y)| -self.forward(r)[y].max(f64::MIN_POSITIVE).ln())
            .sum();
        total / x.rows() as f64
    }
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

struct Adam {
    m: Gradients,
    v: Gradients,
    t: i32,
}

impl Adam {
    fn new(model: &MlpModel) -> Self {
        let zeros = Gradients {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        };
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, g: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for (((p, g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        };
        for (k, layer) in model.layers.iter_mut().enumerate() {
            update(&mut layer.weights, &g.weights[k], &mut self.m.weights[k], &mut self.v.weights[k]);
            update(&mut layer.bias, &g.bias[k], &mut self.m.bias[k], &mut self.v.bias[k]);
        }
    }
}

/// Fits the scaler on `data` (train rows only), then trains for
/// `config.epochs` epochs with per-epoch seeded shuffling. Returns the
/// trained model and the mean loss of each epoch.
pub fn train(model: &MlpModel, data: &Matrix, labels: &[usize], config: &TrainConfig) -> Result<(MlpModel, Vec<f64>)> {
    config.validate()?;
    if labels.len() != data.rows() {
        return Err(Error::DimensionMismatch {
            expected: data.rows(),
            actual: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= model.n_classes()) {
        return Err(Error::UnknownLabel(bad));
    }
    let projected = model.project(data)?;
    let mut model = model.clone();
    model.scaler = Scaler::fit(&projected)?;
    model.config = config.clone();
    let x = model.scaler.transform(&projected)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut adam = Adam::new(&model);
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let (loss, grads) = model.loss_and_gradients(&x, labels, batch);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut model, &grads, config);
        }
        curve.push(epoch_loss / x.rows() as f64);
    }
    Ok((model, curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_2d(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        while rows.len() < n {
            let x: f64 = rng.random_range(-3.0..3.0);
            let y: f64 = rng.random_range(-3.0..3.0);
            let s = x + 0.5 * y - 0.2;
            // keep a margin so the set is cleanly separable
            if s.abs() < 0.3 {
                continue;
            }
            rows.push(vec![x, y]);
            labels.push(usize::from(s > 0.0));
        }
        (Matrix::from_rows(&rows, 2).unwrap(), labels)
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = MlpModel::zeros(&[55, 128, 200, 2], StageTag::Stage1);
        let x = Matrix::from_rows(&[vec![3.0; 55], vec![-1.0; 55]], 55).unwrap();
        for p in m.predict_proba(&x).unwrap() {
            assert_eq!(p, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = MlpModel::standard(55, 3, StageTag::Single, 9);
        let rows: Vec<Vec<f64>> = (0..20).map(|i| (0..55).map(|j| ((i * j) % 13) as f64 - 6.0).collect()).collect();
        let probs = m.predict_proba(&Matrix::from_rows(&rows, 55).unwrap()).unwrap();
        assert_eq!(probs.len(), 20);
        for p in probs {
            assert_eq!(p.len(), 3);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!((softmax(&[1000.0, 0.0])[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = MlpModel::standard(55, 2, StageTag::Stage1, 1);
        let x = Matrix::zeros(3, 54);
        assert!(matches!(m.predict_proba(&x), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            train(&m, &x, &[0, 1, 0], &TrainConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let (x, y) = toy_2d(200, 4);
        let model = MlpModel::standard(2, 2, StageTag::Generic, 4);
        let cfg = TrainConfig { seed: 4, ..TrainConfig::default() };
        let (trained, curve) = train(&model, &x, &y, &cfg).unwrap();
        assert_eq!(curve.len(), 50);
        assert!(curve[49] < curve[0]);
        let pred = trained.predict(&x).unwrap();
        let correct = pred.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert_eq!(correct, 200);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = toy_2d(60, 8);
        let model = MlpModel::standard(2, 2, StageTag::Generic, 8);
        let cfg = TrainConfig { epochs: 5, batch_size: 16, seed: 3, ..TrainConfig::default() };
        let a = train(&model, &x, &y, &cfg).unwrap();
        let b = train(&model, &x, &y, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn finite_difference_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = MlpModel::new(&[6, 9, 7, 3], StageTag::Generic, 21);
        let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let x = Matrix::from_rows(&rows, 6).unwrap();
        let y = vec![0, 2, 1, 1, 0];
        let idx: Vec<usize> = (0..5).collect();
        let (_, g) = model.loss_and_gradients(&x, &y, &idx);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..model.layers.len() {
            for p in 0..model.layers[k].weights.len() {
                let mut plus = model.clone();
                plus.layers[k].weights[p] += h;
                let mut minus = model.clone();
                minus.layers[k].weights[p] -= h;
                let fd = (plus.loss(&x, &y) - minus.loss(&x, &y)) / (2.0 * h);
                let a = g.weights[k][p];
                worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
