use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{combine, Embedding, NliError};
use crate::types::NliLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// Linear hidden layer; used to check optimizer behaviour on a smooth
    /// surrogate of the real head.
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
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
            Activation::Identity => 1.0,
        }
    }
}

const FORMAT: &str = "wikicheck-nli-head";
const VERSION: u32 = 1;

/// One-hidden-layer classifier over `[u; v; |u - v|]` features:
/// `softmax(w2 · act(w1 · x + b1) + b2)`.
///
/// Matrices are row-major: `w1` is `hidden × 3·dim`, `w2` is `3 × hidden`.
/// The JSON weight file stores exactly these fields plus a `format` tag and
/// a `version` number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliHead {
    format: String,
    version: u32,
    pub dim: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Gradients with the same layout as the head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl HeadGradients {
    fn zeros_like(head: &NliHead) -> HeadGradients {
        HeadGradients {
            w1: vec![0.0; head.w1.len()],
            b1: vec![0.0; head.b1.len()],
            w2: vec![0.0; head.w2.len()],
            b2: vec![0.0; head.b2.len()],
        }
    }

    fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied()
    }
}

struct Pass {
    z1: Vec<f64>,
    a1: Vec<f64>,
    probs: [f64; 3],
}

fn softmax(logits: [f64; 3]) -> [f64; 3] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|z| (z - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|x| x / s)
}

impl NliHead {
    /// Builds a head from explicit parameters, checking every shape.
    pub fn from_parts(
        dim: usize,
        hidden: usize,
        activation: Activation,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<NliHead, NliError> {
        let head = NliHead {
            format: FORMAT.to_string(),
            version: VERSION,
            dim,
            hidden,
            activation,
            w1,
            b1,
            w2,
            b2,
        };
        head.validate()?;
        Ok(head)
    }

    /// Zero-initialized head.
    pub fn zeros(dim: usize, hidden: usize) -> NliHead {
        NliHead::from_parts(
            dim,
            hidden,
            Activation::Relu,
            vec![0.0; hidden * 3 * dim],
            vec![0.0; hidden],
            vec![0.0; 3 * hidden],
            vec![0.0; 3],
        )
        .expect("consistent shapes")
    }

    /// Glorot-uniform weights, `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(dim: usize, hidden: usize, activation: Activation, seed: u64) -> NliHead {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut head = NliHead::zeros(dim, hidden);
        head.activation = activation;
        let l1 = (6.0 / (3 * dim + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + 3) as f64).sqrt();
        head.w1.iter_mut().for_each(|w| *w = rng.random_range(-l1..l1));
        head.w2.iter_mut().for_each(|w| *w = rng.random_range(-l2..l2));
        head
    }

    pub fn feature_len(&self) -> usize {
        3 * self.dim
    }

    fn validate(&self) -> Result<(), NliError> {
        let bad = |what: &str| Err(NliError::WeightFile(what.to_string()));
        if self.format != FORMAT {
            return bad("not a wikicheck NLI head");
        }
        if self.version != VERSION {
            return bad("unsupported head version");
        }
        if self.dim == 0 || self.hidden == 0 {
            return bad("dim and hidden must be positive");
        }
        if self.w1.len() != self.hidden * 3 * self.dim
            || self.b1.len() != self.hidden
            || self.w2.len() != 3 * self.hidden
            || self.b2.len() != 3
        {
            return bad("parameter shapes do not match dim/hidden");
        }
        if self.params().any(|p| !p.is_finite()) {
            return bad("non-finite parameter");
        }
        Ok(())
    }

    fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied()
    }

    fn param_mut(&mut self, i: usize) -> &mut f64 {
        let (n1, n2, n3) = (self.w1.len(), self.b1.len(), self.w2.len());
        if i < n1 {
            &mut self.w1[i]
        } else if i < n1 + n2 {
            &mut self.b1[i - n1]
        } else if i < n1 + n2 + n3 {
            &mut self.w2[i - n1 - n2]
        } else {
            &mut self.b2[i - n1 - n2 - n3]
        }
    }

    fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn check_features(&self, features: &[f64]) -> Result<(), NliError> {
        if features.len() != self.feature_len() {
            return Err(NliError::DimMismatch {
                expected: self.feature_len(),
                got: features.len(),
            });
        }
        Ok(())
    }

    fn pass(&self, x: &[f64]) -> Pass {
        let f = x.len();
        let z1: Vec<f64> = (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * f..(h + 1) * f];
                row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.b1[h]
            })
            .collect();
        let a1: Vec<f64> = z1.iter().map(|&z| self.activation.apply(z)).collect();
        let mut logits = [0.0; 3];
        for (c, logit) in logits.iter_mut().enumerate() {
            let row = &self.w2[c * self.hidden..(c + 1) * self.hidden];
            *logit = row.iter().zip(&a1).map(|(w, a)| w * a).sum::<f64>() + self.b2[c];
        }
        Pass {
            z1,
            a1,
            probs: softmax(logits),
        }
    }

    /// Class probabilities in SUPPORTS, REFUTES, NEI order.
    pub fn forward(&self, features: &[f64]) -> Result<[f64; 3], NliError> {
        self.check_features(features)?;
        Ok(self.pass(features).probs)
    }

    pub fn predict(&self, u: &Embedding, v: &Embedding) -> Result<[f64; 3], NliError> {
        self.forward(&combine(u, v)?)
    }

    /// Cross-entropy loss of one example.
    pub fn loss(&self, features: &[f64], label: NliLabel) -> Result<f64, NliError> {
        Ok(-self.forward(features)?[label.index()].ln())
    }

    /// Cross-entropy loss and its gradient for one example.
    pub fn gradients(&self, features: &[f64], label: NliLabel) -> Result<(f64, HeadGradients), NliError> {
        self.check_features(features)?;
        let mut g = HeadGradients::zeros_like(self);
        let loss = self.accumulate(features, label, 1.0, &mut g);
        Ok((loss, g))
    }

    /// Adds `scale ×` the gradient of one example into `g`; returns its loss.
    fn accumulate(&self, x: &[f64], label: NliLabel, scale: f64, g: &mut HeadGradients) -> f64 {
        let f = x.len();
        let pass = self.pass(x);
        let mut dz2 = pass.probs;
        dz2[label.index()] -= 1.0;
        let mut dz1 = vec![0.0; self.hidden];
        for c in 0..3 {
            let d = dz2[c] * scale;
            g.b2[c] += d;
            let row = c * self.hidden;
            for h in 0..self.hidden {
                g.w2[row + h] += d * pass.a1[h];
                dz1[h] += d * self.w2[row + h];
            }
        }
        for h in 0..self.hidden {
            let d = dz1[h] * self.activation.derivative(pass.z1[h]);
            if d == 0.0 {
                continue;
            }
            g.b1[h] += d;
            let row = &mut g.w1[h * f..(h + 1) * f];
            row.iter_mut().zip(x).for_each(|(gw, xi)| *gw += d * xi);
        }
        -pass.probs[label.index()].max(f64::MIN_POSITIVE).ln()
    }

    fn step(&mut self, g: &HeadGradients, lr: f64) {
        let upd = |p: &mut Vec<f64>, d: &Vec<f64>| p.iter_mut().zip(d).for_each(|(w, dw)| *w -= lr * dw);
        upd(&mut self.w1, &g.w1);
        upd(&mut self.b1, &g.b1);
        upd(&mut self.w2, &g.w2);
        upd(&mut self.b2, &g.b2);
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NliError> {
        let json = serde_json::to_string(self).map_err(|e| NliError::WeightFile(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NliHead, NliError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<NliHead, NliError> {
        let head: NliHead = serde_json::from_str(text).map_err(|e| NliError::WeightFile(e.to_string()))?;
        head.validate()?;
        Ok(head)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden: usize,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 10,
            batch_size: 32,
            seed: 0,
            hidden: 128,
            activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NliError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NliError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(NliError::InvalidConfig("batch_size and hidden must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedHead {
    pub head: NliHead,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Fits a head by mini-batch gradient descent on mean cross-entropy.
///
/// Initialization is [`NliHead::glorot`] with `cfg.seed`; the per-epoch
/// shuffle uses an independent stream of the same seed, so runs are fully
/// reproducible.
pub fn train_head(pairs: &[(Embedding, Embedding, NliLabel)], cfg: &TrainConfig) -> Result<TrainedHead, NliError> {
    cfg.validate()?;
    let Some(first) = pairs.first() else {
        return Err(NliError::EmptyTrainingSet);
    };
    let dim = first.0.dim();
    let data: Vec<(Vec<f64>, NliLabel)> = pairs
        .iter()
        .map(|(u, v, l)| {
            if u.dim() != dim {
                return Err(NliError::DimMismatch {
                    expected: dim,
                    got: u.dim(),
                });
            }
            Ok((combine(u, v)?, *l))
        })
        .collect::<Result<_, _>>()?;

    let mut warnings = Vec::new();
    let classes: std::collections::HashSet<NliLabel> = data.iter().map(|d| d.1).collect();
    if classes.len() < 2 {
        let msg = "degenerate training data: only one label class present".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let mut head = NliHead::glorot(dim, cfg.hidden, cfg.activation, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut g = HeadGradients::zeros_like(&head);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                epoch_loss += head.accumulate(&data[i].0, data[i].1, scale, &mut g);
            }
            head.step(&g, cfg.learning_rate);
        }
        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() {
            return Err(NliError::InvalidConfig(format!("training diverged (loss {mean})")));
        }
        history.push(mean);
    }
    Ok(TrainedHead {
        head,
        loss_history: history,
        warnings,
    })
}

/// Largest relative error between the analytic gradient and central finite
/// differences with step `step`, over every parameter of the head.
///
/// The relative error of one parameter is `|a - n| / max(|a|, |n|, 1e-6)`
/// so that gradients that are both (near) zero count as agreeing.
///
/// With ReLU, a first-layer step that would push a hidden pre-activation
/// across zero is shrunk to half the distance to the kink; parameters of a
/// unit sitting exactly on the kink are skipped.
pub fn gradient_check(head: &NliHead, features: &[f64], label: NliLabel, step: f64) -> Result<f64, NliError> {
    let (_, analytic) = head.gradients(features, label)?;
    let z1 = head.pass(features).z1;
    let f = features.len();
    let mut probe = head.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.flat().enumerate().take(head.param_count()) {
        let mut step = step;
        if head.activation == Activation::Relu && i < head.w1.len() + head.b1.len() {
            let (unit, scale) = if i < head.w1.len() {
                (i / f, features[i % f].abs())
            } else {
                (i - head.w1.len(), 1.0)
            };
            let margin = z1[unit].abs();
            if margin == 0.0 {
                continue;
            }
            if step * scale >= margin {
                step = 0.5 * margin / scale;
            }
        }
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + step;
        let plus = probe.loss(features, label)?;
        *probe.param_mut(i) = orig - step;
        let minus = probe.loss(features, label)?;
        *probe.param_mut(i) = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    Ok(worst)
}
