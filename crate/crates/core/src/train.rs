//! Mini-batch training with decoupled-weight-decay Adam.
//!
//! Per-sample forward/backward passes run in parallel; their gradients are
//! summed in sample order so results do not depend on thread scheduling.
//! Pruning runs at the end of every epoch with the scheduled threshold.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Targets};
use crate::error::{KanError, Result};
use crate::kan::{Gradients, KanNetwork, ParamMeta};
use crate::prune::{update_masks, PruneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Softmax cross-entropy; logistic loss on a single output.
    #[default]
    CrossEntropy,
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub seed: u64,
    pub prune: PruneConfig,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            learning_rate: 3e-3,
            weight_decay: 1e-4,
            betas: (0.9, 0.999),
            eps: 1e-8,
            seed: 0,
            prune: PruneConfig::disabled(),
            loss: LossKind::CrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.betas;
        if !(0.0 < b1 && b1 < 1.0 && 0.0 < b2 && b2 < 1.0) {
            return Err(KanError::Config(format!("betas ({b1}, {b2}) must lie in (0, 1)")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(KanError::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(KanError::Config("batch size must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0 && self.eps > 0.0) {
            return Err(KanError::Config("weight decay must be >= 0 and eps > 0".into()));
        }
        self.prune.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One AdamW update:
/// `θ ← θ − lr·m̂/(√v̂ + eps) − lr·wd·θ` with bias-corrected moments.
/// Frozen parameters and their moments are left untouched; weight decay
/// only applies where `meta.decay` is set.
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    meta: &[ParamMeta],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || meta.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(KanError::DimensionMismatch(format!(
            "adam: {n} params, {} grads, {} flags, {} moments",
            grads.len(),
            meta.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let (b1, b2) = cfg.betas;
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = cfg.learning_rate;
    for i in 0..n {
        if meta[i].frozen {
            continue;
        }
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        let decay = if meta[i].decay { lr * cfg.weight_decay * params[i] } else { 0.0 };
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps) + decay;
    }
    Ok(())
}

/// Loss of one sample and its gradient with respect to the logits.
pub fn loss_and_grad(kind: LossKind, logits: &[f64], target: Target<'_>) -> (f64, Vec<f64>) {
    match (kind, target) {
        (LossKind::CrossEntropy, Target::Class(y)) if logits.len() == 1 => {
            let z = logits[0];
            let t = if y == 1 { 1.0 } else { 0.0 };
            // log(1 + e^z) - t·z, stable form
            let loss = z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
            let p = 1.0 / (1.0 + (-z).exp());
            (loss, vec![p - t])
        }
        (LossKind::CrossEntropy, Target::Class(y)) => {
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            let loss = total.ln() - (logits[y] - max);
            let grad = exps
                .iter()
                .enumerate()
                .map(|(i, e)| e / total - if i == y { 1.0 } else { 0.0 })
                .collect();
            (loss, grad)
        }
        (LossKind::Mse, target) => {
            let values: Vec<f64> = match target {
                Target::Values(v) => v.to_vec(),
                Target::Class(y) => one_hot(y, logits.len()),
            };
            let n = logits.len() as f64;
            let loss = logits.iter().zip(&values).map(|(z, t)| (z - t).powi(2)).sum::<f64>() / n;
            let grad = logits.iter().zip(&values).map(|(z, t)| 2.0 * (z - t) / n).collect();
            (loss, grad)
        }
        (LossKind::CrossEntropy, Target::Values(v)) => {
            // Cross-entropy needs class labels; fall back to squared error.
            loss_and_grad(LossKind::Mse, logits, Target::Values(v))
        }
    }
}

fn one_hot(y: usize, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![y as f64];
    }
    (0..n).map(|i| if i == y { 1.0 } else { 0.0 }).collect()
}

#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Class(usize),
    Values(&'a [f64]),
}

fn target_of(ds: &Dataset, i: usize) -> Target<'_> {
    match &ds.targets {
        Targets::Classes { labels, .. } => Target::Class(labels[i]),
        Targets::Values(v) => Target::Values(&v[i]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub loss: f64,
    pub train_acc: f64,
    /// NaN when no validation set was supplied.
    pub val_acc: f64,
    pub tau: f64,
    pub active_edges: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_acc,val_acc,tau,active_edges\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.loss, r.train_acc, r.val_acc, r.tau, r.active_edges
            ));
        }
        out
    }
}

/// Classification accuracy of the quantized model (NaN for regression data
/// or an empty set).
pub fn accuracy(net: &KanNetwork, ds: &Dataset) -> Result<f64> {
    let Some(labels) = ds.labels() else {
        return Ok(f64::NAN);
    };
    if ds.is_empty() {
        return Ok(f64::NAN);
    }
    let predictions = ds
        .features
        .par_iter()
        .map(|x| net.predict(x))
        .collect::<Result<Vec<_>>>()?;
    let correct = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / ds.len() as f64)
}

/// Trains `net` in place. The input normalization should already be set
/// (see [`KanNetwork::set_normalization`]).
pub fn train(net: &mut KanNetwork, train_set: &Dataset, val_set: Option<&Dataset>, cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(KanError::Dataset("training set is empty".into()));
    }
    if train_set.width() != net.input_width() {
        return Err(KanError::DimensionMismatch(format!(
            "dataset has {} features, network expects {}",
            train_set.width(),
            net.input_width()
        )));
    }
    let mut history = History::default();
    if cfg.epochs == 0 {
        return Ok(history);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(net.param_count());
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results = batch
                .par_iter()
                .map(|&i| {
                    let (logits, cache) = net.forward(&train_set.features[i])?;
                    let (loss, dlogits) = loss_and_grad(cfg.loss, &logits, target_of(train_set, i));
                    let grads = net.backward(&cache, &dlogits)?;
                    Ok((loss, grads))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut total = Gradients::zeros(net);
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                total.accumulate(g);
            }
            if !batch_loss.is_finite() {
                return Err(KanError::Training(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            epoch_loss += batch_loss;
            total.scale_by(1.0 / batch.len() as f64);
            let mut params = net.params_flat();
            adamw_step(&mut params, &total.flatten(), &net.param_meta(), &mut state, cfg)?;
            net.set_params_flat(&params)?;
        }

        let tau = cfg.prune.threshold_at(epoch);
        if cfg.prune.enabled() && tau > 0.0 {
            update_masks(net, tau);
        }
        history.epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss / train_set.len() as f64,
            train_acc: accuracy(net, train_set)?,
            val_acc: match val_set {
                Some(v) => accuracy(net, v)?,
                None => f64::NAN,
            },
            tau,
            active_edges: net.active_edges(),
        });
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(n: usize) -> Vec<ParamMeta> {
        vec![
            ParamMeta {
                frozen: false,
                decay: true
            };
            n
        ]
    }

    #[test]
    fn zero_grad_no_decay_is_identity() {
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let mut p = vec![1.0, -2.0, 3.5];
        let mut s = AdamState::new(3);
        adamw_step(&mut p, &[0.0; 3], &meta(3), &mut s, &cfg).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn first_step_by_hand() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            weight_decay: 0.0,
            betas: (0.9, 0.999),
            eps: 1e-8,
            ..TrainConfig::default()
        };
        let mut p = vec![1.0];
        let mut s = AdamState::new(1);
        adamw_step(&mut p, &[1.0], &meta(1), &mut s, &cfg).unwrap();
        // m̂ = v̂ = 1 after bias correction
        let expected = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8));
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn decoupled_decay_shrinks_geometrically() {
        let cfg = TrainConfig {
            learning_rate: 0.01,
            weight_decay: 0.5,
            ..TrainConfig::default()
        };
        let mut p = vec![2.0];
        let mut s = AdamState::new(1);
        for k in 1..=5 {
            adamw_step(&mut p, &[0.0], &meta(1), &mut s, &cfg).unwrap();
            assert!((p[0] - 2.0 * (1.0 - 0.005f64).powi(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn frozen_params_untouched() {
        let cfg = TrainConfig::default();
        let mut p = vec![1.0, 1.0];
        let mut s = AdamState::new(2);
        let m = vec![
            ParamMeta { frozen: true, decay: true },
            ParamMeta { frozen: false, decay: true },
        ];
        adamw_step(&mut p, &[1.0, 1.0], &m, &mut s, &cfg).unwrap();
        assert_eq!(p[0], 1.0);
        assert_eq!(s.m[0], 0.0);
        assert!(p[1] < 1.0);
        assert!(adamw_step(&mut p, &[1.0], &m, &mut s, &cfg).is_err());
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let h = 1e-6;
        for (kind, logits, target) in [
            (LossKind::CrossEntropy, vec![0.3, -1.2, 2.0], Target::Class(1)),
            (LossKind::CrossEntropy, vec![0.7], Target::Class(1)),
            (LossKind::CrossEntropy, vec![-3.1], Target::Class(0)),
            (LossKind::Mse, vec![0.3, -1.2], Target::Values(&[1.0, 0.5])),
            (LossKind::Mse, vec![0.3, -1.2], Target::Class(0)),
        ] {
            let (_, g) = loss_and_grad(kind, &logits, target);
            for i in 0..logits.len() {
                let mut up = logits.clone();
                up[i] += h;
                let mut down = logits.clone();
                down[i] -= h;
                let fd = (loss_and_grad(kind, &up, target).0 - loss_and_grad(kind, &down, target).0) / (2.0 * h);
                assert!((g[i] - fd).abs() < 1e-7, "{kind:?} {i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { betas: (1.0, 0.9), ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
    }
}
