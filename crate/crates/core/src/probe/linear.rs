use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Classifier, Example, ProbeError, ProbeTrainer};
use crate::seed::RunSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeHyper {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for ProbeHyper {
    fn default() -> Self {
        ProbeHyper {
            learning_rate: 5e-5,
            weight_decay: 0.01,
            warmup_ratio: 0.0,
            max_epochs: 12,
            patience: 4,
            batch_size: 8,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub const WARMUP_CANDIDATES: [f64; 3] = [0.0, 0.1, 0.2];

/// Softmax regression: `p = softmax(W^T x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    pub dim: usize,
    pub classes: usize,
    /// Row-major `dim x classes`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearProbe {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        LinearProbe {
            dim,
            classes,
            weights: vec![0.0; dim * classes],
            bias: vec![0.0; classes],
        }
    }

    fn logits(&self, x: &[f32], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (j, &xj) in x.iter().enumerate() {
            let row = &self.weights[j * self.classes..(j + 1) * self.classes];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * xj as f64;
            }
        }
    }

    pub fn predict(&self, x: &[f32]) -> usize {
        argmax(&self.predict_proba(x))
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl Classifier for LinearProbe {
    fn predict_proba(&self, x: &[f32]) -> Vec<f64> {
        let mut p = vec![0.0; self.classes];
        self.logits(x, &mut p);
        softmax_in_place(&mut p);
        p
    }
}

/// Accuracy and mean cross-entropy (nats) on `data`.
pub fn evaluate(model: &dyn Classifier, data: &[Example]) -> (f64, f64) {
    if data.is_empty() {
        return (0.0, 0.0);
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for ex in data {
        let p = model.predict_proba(&ex.x);
        if argmax(&p) == ex.y {
            correct += 1;
        }
        loss -= p[ex.y].max(super::PROB_FLOOR).ln();
    }
    (correct as f64 / data.len() as f64, loss / data.len() as f64)
}

/// Learning-rate multiplier at optimizer step `step`: linear warm-up to 1
/// then linear decay to 0 at `total`.
pub fn lr_multiplier(step: usize, warmup: usize, total: usize) -> f64 {
    if step < warmup {
        step as f64 / warmup.max(1) as f64
    } else {
        ((total - step.min(total)) as f64 / (total - warmup).max(1) as f64).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub val_loss: f64,
}

/// Trains a zero-initialised linear probe with AdamW.
///
/// After each epoch the probe is scored on `val`. The weights with the best
/// validation accuracy (lower loss breaks ties) are kept, and training stops
/// after `patience` epochs without improvement. With an empty `val` every
/// epoch runs and the final weights are returned.
pub fn train_probe(
    train: &[Example],
    val: &[Example],
    classes: usize,
    hyper: &ProbeHyper,
    seed: RunSeed,
) -> Result<(LinearProbe, TrainSummary), ProbeError> {
    let dim = train
        .first()
        .or(val.first())
        .map(|e| e.x.len())
        .ok_or_else(|| ProbeError::Empty("probe training data".into()))?;
    let mut probe = LinearProbe::zeros(dim, classes);
    if train.is_empty() {
        let (a, l) = evaluate(&probe, val);
        return Ok((probe, TrainSummary { epochs_run: 0, best_epoch: 0, val_accuracy: a, val_loss: l }));
    }
    let bs = hyper.batch_size.max(1);
    let steps_per_epoch = train.len().div_ceil(bs);
    let total = steps_per_epoch * hyper.max_epochs;
    let warmup = (hyper.warmup_ratio * total as f64).ceil() as usize;

    let n_params = dim * classes + classes;
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut p = vec![0.0; classes];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = seed.rng("shuffle");
    let mut step = 0usize;

    let mut best = probe.clone();
    let (mut best_acc, mut best_loss) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs_run = 0;

    for epoch in 1..=hyper.max_epochs {
        epochs_run = epoch;
        order.shuffle(&mut rng);
        for batch in order.chunks(bs) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let ex = &train[i];
                probe.logits(&ex.x, &mut p);
                softmax_in_place(&mut p);
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(ProbeError::NonFinite { epoch, step });
                }
                batch_loss -= p[ex.y].max(super::PROB_FLOOR).ln();
                p[ex.y] -= 1.0;
                for (j, &xj) in ex.x.iter().enumerate() {
                    let row = &mut grad[j * classes..(j + 1) * classes];
                    for (g, d) in row.iter_mut().zip(&p) {
                        *g += d * xj as f64;
                    }
                }
                for (g, d) in grad[dim * classes..].iter_mut().zip(&p) {
                    *g += d;
                }
            }
            if !batch_loss.is_finite() {
                return Err(ProbeError::NonFinite { epoch, step });
            }
            let scale = 1.0 / batch.len() as f64;
            step += 1;
            let lr = hyper.learning_rate * lr_multiplier(step - 1, warmup, total);
            let bc1 = 1.0 - hyper.beta1.powi(step as i32);
            let bc2 = 1.0 - hyper.beta2.powi(step as i32);
            let n_w = dim * classes;
            for k in 0..n_params {
                let g = grad[k] * scale;
                m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g;
                v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g * g;
                let update = lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + hyper.epsilon);
                let param = if k < n_w { &mut probe.weights[k] } else { &mut probe.bias[k - n_w] };
                // decoupled decay, weights only
                if k < n_w {
                    *param -= lr * hyper.weight_decay * *param;
                }
                *param -= update;
            }
        }
        if val.is_empty() {
            continue;
        }
        let (acc, loss) = evaluate(&probe, val);
        if !loss.is_finite() {
            return Err(ProbeError::NonFinite { epoch, step });
        }
        if acc > best_acc || (acc == best_acc && loss < best_loss) {
            best = probe.clone();
            best_acc = acc;
            best_loss = loss;
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hyper.patience {
                break;
            }
        }
    }
    if val.is_empty() {
        return Ok((probe, TrainSummary { epochs_run, best_epoch: epochs_run, val_accuracy: 0.0, val_loss: 0.0 }));
    }
    Ok((
        best,
        TrainSummary {
            epochs_run,
            best_epoch,
            val_accuracy: best_acc,
            val_loss: best_loss,
        },
    ))
}

/// Trains one probe per candidate warm-up ratio on all of `train` and
/// returns the ratio with the best validation accuracy (earliest on ties).
pub fn select_warmup(
    train: &[Example],
    val: &[Example],
    classes: usize,
    hyper: &ProbeHyper,
    candidates: &[f64],
    seed: RunSeed,
) -> Result<f64, ProbeError> {
    let mut best: Option<(f64, f64)> = None;
    for &ratio in candidates {
        let h = ProbeHyper {
            warmup_ratio: ratio,
            ..hyper.clone()
        };
        let (_, s) = train_probe(train, val, classes, &h, seed.child("warmup"))?;
        if best.is_none_or(|(_, acc)| s.val_accuracy > acc) {
            best = Some((ratio, s.val_accuracy));
        }
    }
    best.map(|b| b.0)
        .ok_or_else(|| ProbeError::Config("no warm-up candidates".into()))
}

/// [`ProbeTrainer`] for the linear probe.
#[derive(Debug, Clone)]
pub struct LinearTrainer {
    pub classes: usize,
    pub hyper: ProbeHyper,
}

impl ProbeTrainer for LinearTrainer {
    fn fit(&self, train: &[Example], val: &[Example], seed: RunSeed) -> Result<Box<dyn Classifier>, ProbeError> {
        if train.is_empty() && val.is_empty() {
            return Err(ProbeError::Empty("probe training data".into()));
        }
        Ok(Box::new(train_probe(train, val, self.classes, &self.hyper, seed)?.0))
    }
}
