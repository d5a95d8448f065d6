//! Mini-batch training, prediction and evaluation.
//!
//! Training is strictly sequential: batches are visited in a seeded order and,
//! inside a batch, per-sample gradients are summed in ascending sample index
//! before being divided by the batch size. Identical seed, data and config
//! therefore reproduce parameters and history bit for bit.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::layers::softmax_slice;
use crate::loss::{one_hot_index, softmax_ce_grad};
use crate::metrics::{classification_report, confusion_matrix, EvalReport};
use crate::model::{build_model, ArchitectureConfig, ModelParams};
use crate::optim::{AdamConfig, AdamState};
use crate::pipeline::{
    apply_standardizer, encode_labels, fit_standardizer, one_hot_rows, stratified_split,
    PreprocState, SplitIndices,
};
use crate::taxonomy::{Task, Taxonomy};
use crate::tensor::{argmax, Tensor};
use crate::{seeded_rng_stream, STREAM_INIT, STREAM_SHUFFLE};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub val_fraction: f64,
    pub seed: u64,
    /// Epochs without validation-loss improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            adam: AdamConfig::default(),
            val_fraction: 0.2,
            seed: 42,
            early_stop_patience: 0,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                a.lr
            )));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "invalid Adam hyperparameters: {a:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochStats {
    /// Mean loss over the epoch's training samples, taken before each batch update.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Zero-based epoch with the lowest validation loss (earliest on ties).
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// Standardized `(N, F, 1)` features with `(N, C)` one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub features: Tensor,
    pub targets: Tensor,
    classes: Vec<usize>,
}

impl Samples {
    pub fn new(features: Tensor, targets: Tensor) -> Result<Self> {
        let (&[n, _, 1], &[nt, _]) = (features.shape(), targets.shape()) else {
            return Err(Error::Dimension(format!(
                "samples need (N, F, 1) features and (N, C) targets, got {:?} and {:?}",
                features.shape(),
                targets.shape()
            )));
        };
        if n != nt {
            return Err(Error::Dimension(format!(
                "{n} feature rows but {nt} target rows"
            )));
        }
        let classes = (0..n)
            .map(|i| one_hot_index(targets.row(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Samples {
            features,
            targets,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.targets.shape()[1]
    }

    pub fn feature_count(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    fn input(&self, i: usize) -> Result<Tensor> {
        self.features.index_axis0(i)
    }

    fn target(&self, i: usize) -> Result<Tensor> {
        self.targets.index_axis0(i)
    }
}

fn check_compatible(model: &ModelParams, s: &Samples, what: &str) -> Result<()> {
    if s.is_empty() {
        return Ok(());
    }
    if s.class_count() != model.arch.class_count {
        return Err(Error::Dimension(format!(
            "{what} targets have {} classes, model outputs {}",
            s.class_count(),
            model.arch.class_count
        )));
    }
    if s.feature_count() != model.arch.feature_count {
        return Err(Error::Dimension(format!(
            "{what} samples have {} features, model expects {}",
            s.feature_count(),
            model.arch.feature_count
        )));
    }
    Ok(())
}

/// Mean loss and accuracy over `s`.
pub fn score(model: &ModelParams, s: &Samples) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for i in 0..s.len() {
        let logits = model.logits(&s.input(i)?)?;
        let lv = softmax_ce_grad(&logits, &s.target(i)?)?;
        loss += lv.loss;
        if lv.probs.argmax() == Some(s.classes[i]) {
            correct += 1;
        }
    }
    let n = s.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn train(
    model: ModelParams,
    train_set: &Samples,
    val_set: &Samples,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    train_with_progress(model, train_set, val_set, cfg, |_, _| {})
}

/// As [`train`], calling `on_epoch(stats, zero_based_epoch)` after each epoch.
pub fn train_with_progress(
    mut model: ModelParams,
    train_set: &Samples,
    val_set: &Samples,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats, usize),
) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    check_compatible(&model, train_set, "training")?;
    check_compatible(&model, val_set, "validation")?;
    if cfg.early_stop_patience > 0 && val_set.is_empty() {
        return Err(Error::Config(
            "early stopping needs a non-empty validation set".into(),
        ));
    }

    let mut adam = AdamState::new(cfg.adam, model.params())?;
    let mut rng = seeded_rng_stream(cfg.seed, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();
    let mut best_loss: Option<f64> = None;
    let mut snapshot: Option<ModelParams> = None;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        if cfg.shuffle_each_epoch {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = chunk.to_vec();
            batch.sort_unstable();
            let mut sum: Option<Vec<Tensor>> = None;
            for &i in &batch {
                let (lv, grads) =
                    model.loss_and_grads(&train_set.input(i)?, &train_set.target(i)?)?;
                loss_sum += lv.loss;
                if lv.probs.argmax() == Some(train_set.classes[i]) {
                    correct += 1;
                }
                match sum.as_mut() {
                    None => sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            for (av, &gv) in a.data_mut().iter_mut().zip(g.data()) {
                                *av += gv;
                            }
                        }
                    }
                }
            }
            let mut mean = sum.ok_or_else(|| Error::Internal("empty batch".into()))?;
            let len = batch.len() as f64;
            for t in &mut mean {
                for v in t.data_mut() {
                    *v /= len;
                }
            }
            adam.step(&mut model.params_mut(), &mean)?;
        }

        let n = train_set.len() as f64;
        let (val_loss, val_accuracy) = if val_set.is_empty() {
            (None, None)
        } else {
            let (l, a) = score(&model, val_set)?;
            (Some(l), Some(a))
        };
        let stats = EpochStats {
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
        };
        if !stats.train_loss.is_finite() {
            return Err(Error::Validation(format!(
                "training diverged at epoch {}: loss is {}",
                epoch + 1,
                stats.train_loss
            )));
        }
        history.epochs.push(stats);
        on_epoch(&stats, epoch);

        if let Some(vl) = val_loss {
            if best_loss.is_none_or(|b| vl < b) {
                history.best_epoch = Some(epoch);
                best_loss = Some(vl);
                since_best = 0;
                if cfg.early_stop_patience > 0 {
                    snapshot = Some(model.clone());
                }
            } else {
                since_best += 1;
            }
            if cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience {
                history.stopped_early = true;
                break;
            }
        }
    }

    if history.stopped_early {
        if let Some(m) = snapshot {
            model = m;
        }
    }
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Argmax class per row, lowest index on ties.
    pub classes: Vec<usize>,
    /// `(N, C)` softmax rows.
    pub probabilities: Tensor,
}

/// Applies the stored standardization, then the forward pass.
pub fn predict(
    model: &ModelParams,
    preproc: &PreprocState,
    raw_features: &Tensor,
) -> Result<Prediction> {
    if preproc.feature_count() != model.arch.feature_count
        || preproc.class_count() != model.arch.class_count
    {
        return Err(Error::Config(format!(
            "preprocessing state ({} features, {} classes) does not match model ({} features, {} classes)",
            preproc.feature_count(),
            preproc.class_count(),
            model.arch.feature_count,
            model.arch.class_count
        )));
    }
    let z = apply_standardizer(&preproc.standardizer, raw_features)?;
    let n = z.shape()[0];
    let c = model.arch.class_count;
    let mut classes = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n * c);
    for i in 0..n {
        let logits = model.logits(&z.index_axis0(i)?)?;
        let p = softmax_slice(logits.data());
        classes.push(argmax(&p).ok_or_else(|| Error::Internal("empty probability row".into()))?);
        probs.extend_from_slice(&p);
    }
    Ok(Prediction {
        classes,
        probabilities: Tensor::new(alloc::vec![n, c], probs)?,
    })
}

/// Maps `dataset` labels for `task`, predicts and scores against them.
pub fn evaluate(
    model: &ModelParams,
    preproc: &PreprocState,
    dataset: &Dataset,
    taxonomy: &Taxonomy,
    task: Task,
) -> Result<EvalReport> {
    if task != preproc.task {
        return Err(Error::Config(format!(
            "model was trained for the {} task, cannot evaluate it on the {task} task",
            preproc.task
        )));
    }
    if model.arch.class_count != preproc.class_count() {
        return Err(Error::Config(format!(
            "model has {} outputs but the {task} label map has {} classes",
            model.arch.class_count,
            preproc.class_count()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Validation("evaluation set is empty".into()));
    }
    let labels = taxonomy.map_labels(&dataset.raw_labels, task)?;
    let truth = labels
        .iter()
        .map(|l| {
            preproc.class_index(l).ok_or_else(|| {
                Error::Validation(format!(
                    "label `{l}` was not among the model's training classes"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pred = predict(model, preproc, &dataset.features)?;
    let cm = confusion_matrix(&truth, &pred.classes, preproc.class_count())?;
    classification_report(&cm, &preproc.label_map)
}

/// Everything produced by an end-to-end training run.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: ModelParams,
    pub preproc: PreprocState,
    pub history: TrainHistory,
    pub split: SplitIndices,
    /// Report on the held-out validation rows, when there are any.
    pub validation: Option<EvalReport>,
}

/// Label mapping, encoding, stratified split, standardizer fit on the training
/// rows only, model construction and training.
pub fn fit(
    dataset: &Dataset,
    taxonomy: &Taxonomy,
    task: Task,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochStats, usize),
) -> Result<FitOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Validation(format!(
            "dataset `{}` has no samples",
            dataset.source
        )));
    }
    let labels = taxonomy.map_labels(&dataset.raw_labels, task)?;
    let (label_map, idx) = encode_labels(&labels)?;
    let split = stratified_split(&idx, cfg.val_fraction, cfg.seed)?;

    let train_ds = dataset.select(&split.train_indices)?;
    let standardizer = fit_standardizer(&train_ds.features)?;
    let preproc = PreprocState::new(standardizer, label_map, task)?;
    let c = preproc.class_count();

    let to_samples = |rows: &[usize], ds: &Dataset| -> Result<Samples> {
        let classes: Vec<usize> = rows.iter().map(|&r| idx[r]).collect();
        Samples::new(
            apply_standardizer(&preproc.standardizer, &ds.features)?,
            one_hot_rows(&classes, c)?,
        )
    };
    let train_set = to_samples(&split.train_indices, &train_ds)?;
    let val_ds = dataset.select(&split.val_indices)?;
    let val_set = to_samples(&split.val_indices, &val_ds)?;

    let arch = ArchitectureConfig::new(dataset.feature_count(), c);
    let model = build_model(arch, &mut seeded_rng_stream(cfg.seed, STREAM_INIT))?;
    let (model, history) = train_with_progress(model, &train_set, &val_set, cfg, on_epoch)?;

    let validation = if val_ds.is_empty() {
        None
    } else {
        Some(evaluate(&model, &preproc, &val_ds, taxonomy, task)?)
    };
    Ok(FitOutcome {
        model,
        preproc,
        history,
        split,
        validation,
    })
}
