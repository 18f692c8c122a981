//! Contribution classifier: a one-hidden-layer network over the feature
//! vectors before and after a construction, trained by mini-batch gradient
//! descent on binary cross-entropy.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attn::Strategy;
use crate::features::FeatureVector;

const MAGIC: &[u8; 8] = b"AUXGMLP1";

#[derive(Debug, thiserror::Error)]
pub enum ScorerError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset holds only label {0}; both classes are required")]
    DegenerateDataset(u8),
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("model file does not start with the expected magic bytes")]
    BadMagic,
    #[error("model file is malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub v_before: FeatureVector,
    pub v_after: FeatureVector,
    pub label: u8,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    /// 1 when `probability ≥ 0.5`.
    pub f: u8,
}

impl Prediction {
    pub fn from_probability(probability: f64) -> Self {
        Prediction { probability, f: u8::from(probability >= 0.5) }
    }
}

/// Anything that can judge whether a construction helps.
pub trait Contribution: Sync {
    fn contribution(&self, strategy: &Strategy, before: &FeatureVector, after: &FeatureVector) -> Prediction;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Stop after this many epochs without improvement in validation loss
    /// (training loss when there is no validation split).
    pub patience: Option<usize>,
    pub hidden: usize,
    /// Feed `after − before` as six extra inputs.
    pub diff_channel: bool,
    /// Multiplier on the loss of positive examples.
    pub positive_weight: f64,
    /// Fraction of the data held out for validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 16,
            max_epochs: 200,
            seed: 0,
            patience: None,
            hidden: 32,
            diff_channel: false,
            positive_weight: 1.0,
            validation_fraction: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

/// Network weights plus the input standardization fitted on training data.
#[derive(Clone, Debug, PartialEq)]
pub struct ContributionModel {
    input: usize,
    hidden: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `hidden × input`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

/// Gradient of the loss with respect to the trainable weights, laid out like
/// [`ContributionModel::params`].
pub type Gradient = Vec<f64>;

pub fn input_width(diff_channel: bool) -> usize {
    if diff_channel {
        18
    } else {
        12
    }
}

fn raw_input(width: usize, before: &FeatureVector, after: &FeatureVector) -> Vec<f64> {
    let (b, a) = (before.as_f64(), after.as_f64());
    let mut x = Vec::with_capacity(width);
    x.extend_from_slice(&b);
    x.extend_from_slice(&a);
    if width == 18 {
        x.extend((0..6).map(|k| a[k] - b[k]));
    }
    x
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl ContributionModel {
    /// All weights zero: every prediction is exactly 0.5.
    pub fn zeros(hidden: usize, diff_channel: bool) -> Self {
        let input = input_width(diff_channel);
        ContributionModel {
            input,
            hidden,
            mean: vec![0.0; input],
            scale: vec![1.0; input],
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// Uniform weights in `±1/√fan_in` from a seeded generator.
    pub fn init(hidden: usize, diff_channel: bool, seed: u64) -> Self {
        let mut m = Self::zeros(hidden, diff_channel);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = 1.0 / (m.input as f64).sqrt();
        for w in &mut m.w1 {
            *w = rng.gen_range(-r1..=r1);
        }
        for b in &mut m.b1 {
            *b = rng.gen_range(-r1..=r1);
        }
        let r2 = 1.0 / (hidden as f64).sqrt();
        for w in &mut m.w2 {
            *w = rng.gen_range(-r2..=r2);
        }
        m.b2 = rng.gen_range(-r2..=r2);
        m
    }

    pub fn input_width(&self) -> usize {
        self.input
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Sets the input standardization to the mean and standard deviation of
    /// `data`; constant inputs get scale 1.
    pub fn fit_standardization(&mut self, data: &[TrainingExample]) {
        let xs: Vec<Vec<f64>> = data.iter().map(|e| raw_input(self.input, &e.v_before, &e.v_after)).collect();
        let n = xs.len().max(1) as f64;
        for k in 0..self.input {
            let mean = xs.iter().map(|x| x[k]).sum::<f64>() / n;
            let var = xs.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / n;
            self.mean[k] = mean;
            self.scale[k] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
    }

    fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }

    fn hidden_act(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.input..(j + 1) * self.input];
                (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j]).tanh()
            })
            .collect()
    }

    fn logit(&self, h: &[f64]) -> f64 {
        self.w2.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.b2
    }

    pub fn probability(&self, before: &FeatureVector, after: &FeatureVector) -> f64 {
        let x = self.standardize(&raw_input(self.input, before, after));
        sigmoid(self.logit(&self.hidden_act(&x)))
    }

    pub fn predict(&self, before: &FeatureVector, after: &FeatureVector) -> Prediction {
        Prediction::from_probability(self.probability(before, after))
    }

    /// Probabilities for many pairs at once.
    pub fn predict_batch(&self, pairs: &[(FeatureVector, FeatureVector)]) -> Vec<f64> {
        let xs: Vec<Vec<f64>> = pairs.iter().map(|(b, a)| self.standardize(&raw_input(self.input, b, a))).collect();
        let mut z = vec![self.b2; xs.len()];
        for j in 0..self.hidden {
            let row = &self.w1[j * self.input..(j + 1) * self.input];
            for (i, x) in xs.iter().enumerate() {
                let h = (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j]).tanh();
                z[i] += self.w2[j] * h;
            }
        }
        // Summation order differs from the single forward pass; callers
        // compare within 1e-12.
        z.into_iter().map(sigmoid).collect()
    }

    /// Trainable weights flattened: `w1`, `b1`, `w2`, `b2`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.w1.len() + 2 * self.hidden + 1);
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (n1, h) = (self.w1.len(), self.hidden);
        assert_eq!(p.len(), n1 + 2 * h + 1, "parameter count");
        self.w1.copy_from_slice(&p[..n1]);
        self.b1.copy_from_slice(&p[n1..n1 + h]);
        self.w2.copy_from_slice(&p[n1 + h..n1 + 2 * h]);
        self.b2 = p[n1 + 2 * h];
    }

    /// Mean weighted cross-entropy over `batch`.
    pub fn loss(&self, batch: &[TrainingExample], positive_weight: f64) -> f64 {
        self.loss_and_grad(batch, positive_weight).0
    }

    /// Mean weighted cross-entropy over `batch` and its gradient.
    pub fn loss_and_grad(&self, batch: &[TrainingExample], positive_weight: f64) -> (f64, Gradient) {
        let (n1, h) = (self.w1.len(), self.hidden);
        let mut g = vec![0.0; n1 + 2 * h + 1];
        let mut loss = 0.0;
        for e in batch {
            let x = self.standardize(&raw_input(self.input, &e.v_before, &e.v_after));
            let hid = self.hidden_act(&x);
            let z = self.logit(&hid);
            let y = f64::from(e.label);
            // -[w·y·ln σ(z) + (1-y)·ln(1-σ(z))]
            loss += positive_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
            let p = sigmoid(z);
            let dz = -positive_weight * y * (1.0 - p) + (1.0 - y) * p;
            for j in 0..h {
                g[n1 + h + j] += dz * hid[j];
                let da = dz * self.w2[j] * (1.0 - hid[j] * hid[j]);
                g[n1 + j] += da;
                let row = &mut g[j * self.input..(j + 1) * self.input];
                for (gk, xk) in row.iter_mut().zip(&x) {
                    *gk += da * xk;
                }
            }
            g[n1 + 2 * h] += dz;
        }
        let n = batch.len().max(1) as f64;
        for v in &mut g {
            *v /= n;
        }
        (loss / n, g)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for size in [self.input, self.hidden, 1] {
            out.extend_from_slice(&(size as u64).to_le_bytes());
        }
        let floats =
            self.mean.iter().chain(&self.scale).chain(&self.w1).chain(&self.b1).chain(&self.w2).chain([&self.b2]);
        for v in floats {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ScorerError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(ScorerError::BadMagic);
        }
        let mut rest = &bytes[MAGIC.len()..];
        let read_u64 = |rest: &mut &[u8]| -> Result<u64, ScorerError> {
            let mut buf = [0u8; 8];
            rest.read_exact(&mut buf).map_err(|_| ScorerError::Malformed("truncated header".into()))?;
            Ok(u64::from_le_bytes(buf))
        };
        let input = read_u64(&mut rest)? as usize;
        let hidden = read_u64(&mut rest)? as usize;
        let output = read_u64(&mut rest)? as usize;
        if !(input == 12 || input == 18) || output != 1 || hidden == 0 || hidden > 1 << 16 {
            return Err(ScorerError::Malformed(format!("unsupported layer sizes {input}/{hidden}/{output}")));
        }
        let count = 2 * input + hidden * input + 2 * hidden + 1;
        if rest.len() != count * 8 {
            return Err(ScorerError::Malformed(format!("expected {} weight bytes, found {}", count * 8, rest.len())));
        }
        let vals: Vec<f64> = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let mut m = Self::zeros(hidden, input == 18);
        m.mean.copy_from_slice(&vals[..input]);
        m.scale.copy_from_slice(&vals[input..2 * input]);
        m.set_params(&vals[2 * input..]);
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScorerError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ScorerError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl Contribution for ContributionModel {
    fn contribution(&self, _: &Strategy, before: &FeatureVector, after: &FeatureVector) -> Prediction {
        self.predict(before, after)
    }
}

/// The same verdict for every construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantContribution(pub f64);

impl Contribution for ConstantContribution {
    fn contribution(&self, _: &Strategy, _: &FeatureVector, _: &FeatureVector) -> Prediction {
        Prediction::from_probability(self.0)
    }
}

fn check_dataset(data: &[TrainingExample]) -> Result<(), ScorerError> {
    let first = data.first().ok_or(ScorerError::EmptyDataset)?.label;
    if data.iter().all(|e| e.label == first) {
        return Err(ScorerError::DegenerateDataset(first));
    }
    Ok(())
}

fn accuracy(model: &ContributionModel, data: &[TrainingExample]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter().filter(|e| model.predict(&e.v_before, &e.v_after).f == e.label).count() as f64 / data.len() as f64
}

/// Trains a fresh model. Deterministic for a fixed configuration.
pub fn train(data: &[TrainingExample], cfg: &TrainConfig) -> Result<(ContributionModel, TrainReport), ScorerError> {
    check_dataset(data)?;
    if cfg.learning_rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        || cfg.batch_size == 0
        || cfg.hidden == 0
    {
        return Err(ScorerError::BadConfig("learning rate, batch size and hidden width must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(ScorerError::BadConfig("validation fraction must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let n_val = (data.len() as f64 * cfg.validation_fraction).floor() as usize;
    let (train_set, val_set): (Vec<TrainingExample>, Vec<TrainingExample>) = if n_val > 0 {
        order.shuffle(&mut rng);
        (order[n_val..].iter().map(|&i| data[i]).collect(), order[..n_val].iter().map(|&i| data[i]).collect())
    } else {
        (data.to_vec(), Vec::new())
    };
    check_dataset(&train_set)?;

    let mut model = ContributionModel::init(cfg.hidden, cfg.diff_channel, rng.gen());
    model.fit_standardization(&train_set);
    let mut report = TrainReport::default();
    let mut idx: Vec<usize> = (0..train_set.len()).collect();
    let mut best = (f64::INFINITY, 0usize, model.clone());
    for epoch in 0..cfg.max_epochs {
        idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in idx.chunks(cfg.batch_size) {
            let batch: Vec<TrainingExample> = chunk.iter().map(|&i| train_set[i]).collect();
            let (loss, grad) = model.loss_and_grad(&batch, cfg.positive_weight);
            total += loss * batch.len() as f64;
            let mut p = model.params();
            for (w, g) in p.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g;
            }
            model.set_params(&p);
        }
        report.epoch_loss.push(total / train_set.len() as f64);
        let monitored = if val_set.is_empty() {
            model.loss(&train_set, cfg.positive_weight)
        } else {
            let v = model.loss(&val_set, cfg.positive_weight);
            report.validation_loss.push(v);
            v
        };
        if let Some(patience) = cfg.patience {
            if monitored < best.0 {
                best = (monitored, epoch, model.clone());
            } else if epoch - best.1 >= patience {
                model = best.2.clone();
                break;
            }
        }
    }
    report.train_accuracy = accuracy(&model, &train_set);
    if !val_set.is_empty() {
        report.validation_accuracy = Some(accuracy(&model, &val_set));
    }
    Ok((model, report))
}

/// Confusion counts under the 0.5 threshold.
pub fn evaluate(model: &ContributionModel, data: &[TrainingExample]) -> Result<Metrics, ScorerError> {
    if data.is_empty() {
        return Err(ScorerError::EmptyDataset);
    }
    let mut m = Metrics::default();
    for e in data {
        match (model.predict(&e.v_before, &e.v_after).f, e.label) {
            (1, 1) => m.true_positive += 1,
            (1, _) => m.false_positive += 1,
            (_, 1) => m.false_negative += 1,
            _ => m.true_negative += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    m.accuracy = ratio(m.true_positive + m.true_negative, data.len());
    m.precision = ratio(m.true_positive, m.true_positive + m.false_positive);
    m.recall = ratio(m.true_positive, m.true_positive + m.false_negative);
    Ok(m)
}

/// Seeded shuffle into 80% train, 10% validation and 10% test.
pub fn split_dataset<T: Clone>(data: &[T], seed: u64) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut v = data.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let tenth = data.len() / 10;
    let test = v.split_off(v.len() - tenth);
    let val = v.split_off(v.len() - tenth);
    (v, val, test)
}
