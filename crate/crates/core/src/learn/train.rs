use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::metrics::{roc_auc, pr_auc};

use super::data::{Example, SyntheticDataset};
use super::model::{backward, bce_with_logits, forward, sigmoid, FrontEndConfig};
use super::optim::{adam_step, early_stop, lr_schedule, TrainState};
use super::params::ParamVector;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// When false only the head (and normalization affine) is updated.
    pub train_front_end: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 4,
            max_epochs: 200,
            seed: 7,
            train_front_end: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub loss: f64,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub accuracy: f64,
    /// `N x C` sigmoid outputs.
    pub scores: Vec<f64>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final state with the best-validation parameters restored.
    pub state: TrainState,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Error)]
#[error("training aborted at epoch {epoch}: {error}")]
pub struct TrainAbort {
    pub error: Error,
    pub epoch: usize,
    /// State after the last update that completed with finite values.
    pub last_good: Box<TrainState>,
    pub history: Vec<EpochRecord>,
}

fn one_hot(label: usize, n: usize) -> Vec<f64> {
    (0..n).map(|c| if c == label { 1.0 } else { 0.0 }).collect()
}

/// Mean loss and mean gradient over `batch`, with the per-example sigmoid
/// scores. Examples are reduced in order, so the result is deterministic.
pub fn batch_gradient(
    batch: &[&Example],
    params: &ParamVector,
    config: &FrontEndConfig,
    front_end: bool,
) -> Result<(f64, ParamVector, Vec<Vec<f64>>)> {
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    let mut scores = Vec::with_capacity(batch.len());
    for ex in batch {
        let cache = forward(&ex.waveform, params, config)?;
        let (l, dz) = bce_with_logits(&cache.logits, &one_hot(ex.label, config.n_classes));
        let g = backward(&cache, params, config, &dz, front_end)?;
        total.add_scaled(&g, 1.0);
        loss += l;
        scores.push(cache.logits.iter().map(|&z| sigmoid(z)).collect());
    }
    let inv = 1.0 / batch.len() as f64;
    total.scale(inv);
    Ok((loss * inv, total, scores))
}

fn summarize(scores: &[Vec<f64>], labels: &[usize], n_classes: usize, loss: f64) -> EvalSummary {
    let mut roc = Vec::new();
    let mut pr = Vec::new();
    for c in 0..n_classes {
        let s: Vec<f64> = scores.iter().map(|r| r[c]).collect();
        let l: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        if let Ok(v) = roc_auc(&s, &l) {
            roc.push(v);
        }
        if let Ok(v) = pr_auc(&s, &l) {
            pr.push(v);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, &y)| {
            let pred = s
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0;
            pred == y
        })
        .count();
    EvalSummary {
        loss,
        roc_auc: mean(&roc),
        pr_auc: mean(&pr),
        accuracy: if labels.is_empty() {
            0.0
        } else {
            correct as f64 / labels.len() as f64
        },
        scores: scores.iter().flatten().copied().collect(),
        labels: labels.to_vec(),
    }
}

/// Loss, macro ROC-AUC / PR-AUC and accuracy on the given examples.
pub fn evaluate(
    dataset: &SyntheticDataset,
    indices: &[usize],
    params: &ParamVector,
    config: &FrontEndConfig,
) -> Result<EvalSummary> {
    let mut scores = Vec::with_capacity(indices.len());
    let mut labels = Vec::with_capacity(indices.len());
    let mut loss = 0.0;
    for &i in indices {
        let ex = &dataset.examples[i];
        let cache = forward(&ex.waveform, params, config)?;
        loss += bce_with_logits(&cache.logits, &one_hot(ex.label, config.n_classes)).0;
        scores.push(cache.logits.iter().map(|&z| sigmoid(z)).collect());
        labels.push(ex.label);
    }
    let n = indices.len().max(1) as f64;
    Ok(summarize(&scores, &labels, config.n_classes, loss / n))
}

/// Minibatch Adam on the training split with plateau halving and early
/// stopping on the validation loss. The best-validation parameters are
/// returned.
pub fn train(
    config: &FrontEndConfig,
    train_cfg: &TrainConfig,
    dataset: &SyntheticDataset,
    init: ParamVector,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    let mut state = TrainState::new(init, train_cfg.lr);
    train_from(config, train_cfg, dataset, &mut state)
}

pub fn train_from(
    config: &FrontEndConfig,
    train_cfg: &TrainConfig,
    dataset: &SyntheticDataset,
    state: &mut TrainState,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    let mut history = Vec::new();
    let abort = |error: Error, epoch: usize, state: &TrainState, history: &Vec<EpochRecord>| TrainAbort {
        error,
        epoch,
        last_good: Box::new(state.clone()),
        history: history.clone(),
    };
    if let Err(e) = config.check_params(&state.params) {
        return Err(abort(e, 0, state, &history));
    }
    if dataset.n_classes() != config.n_classes {
        let e = Error::Config(format!(
            "dataset has {} classes, model {}",
            dataset.n_classes(),
            config.n_classes
        ));
        return Err(abort(e, 0, state, &history));
    }
    if dataset.train.is_empty() || dataset.val.is_empty() || train_cfg.batch_size == 0 {
        return Err(abort(
            Error::Config("empty training/validation split or zero batch size".into()),
            0,
            state,
            &history,
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let mut best_params = state.params.clone();
    let mut best_epoch = 0;
    let mut epochs_run = 0;
    for epoch in 1..=train_cfg.max_epochs {
        let lr = state.lr;
        let mut order = dataset.train.clone();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut scores = Vec::with_capacity(order.len());
        let mut labels = Vec::with_capacity(order.len());
        for chunk in order.chunks(train_cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &dataset.examples[i]).collect();
            let (loss, grads, s) = batch_gradient(&batch, &state.params, config, train_cfg.train_front_end)
                .map_err(|e| abort(e, epoch, state, &history))?;
            if !loss.is_finite() {
                return Err(abort(
                    Error::NonFinite {
                        block: "training loss".into(),
                        index: epoch,
                    },
                    epoch,
                    state,
                    &history,
                ));
            }
            adam_step(state, &grads).map_err(|e| abort(e, epoch, state, &history))?;
            loss_sum += loss * chunk.len() as f64;
            scores.extend(s);
            labels.extend(batch.iter().map(|e| e.label));
        }
        let train_summary = summarize(&scores, &labels, config.n_classes, loss_sum / order.len() as f64);
        history.push(EpochRecord {
            epoch,
            split: Split::Train,
            loss: train_summary.loss,
            roc_auc: train_summary.roc_auc,
            pr_auc: train_summary.pr_auc,
            lr,
        });

        let val = evaluate(dataset, &dataset.val, &state.params, config)
            .map_err(|e| abort(e, epoch, state, &history))?;
        if !val.loss.is_finite() {
            return Err(abort(
                Error::NonFinite {
                    block: "validation loss".into(),
                    index: epoch,
                },
                epoch,
                state,
                &history,
            ));
        }
        history.push(EpochRecord {
            epoch,
            split: Split::Val,
            loss: val.loss,
            roc_auc: val.roc_auc,
            pr_auc: val.pr_auc,
            lr,
        });
        epochs_run = epoch;
        if lr_schedule(state, val.loss) {
            best_params = state.params.clone();
            best_epoch = epoch;
        }
        if early_stop(state) {
            break;
        }
    }
    state.params = best_params;
    Ok(TrainOutcome {
        state: state.clone(),
        history,
        best_epoch,
        epochs_run,
    })
}
