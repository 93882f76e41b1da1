//! Regularized training, the fit / prune / finetune pipeline, and the
//! initial regularization strength heuristic.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group_lasso::{add_penalty_subgradient, penalty, unscaled_penalty, PenaltyConfig};
use crate::model::{Dropout, Example, RationalModel};
use crate::numeric::logistic_loss;
use crate::optim::{adam_step, clip_global_norm, AdamConfig, AdamState};
use crate::prune::{count_transitions, prune, structure_at, PruneReport, PrunedStructure};

/// Default pruning threshold on raw group norms.
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub embedding_dropout: f64,
    pub recurrent_dropout: f64,
    /// Accepted for completeness; a single-layer model has nothing to apply it to.
    pub vertical_dropout: f64,
    /// Coefficient of `0.5 * ||classifier weights||^2`.
    pub l2_classifier: f64,
    /// Decoupled weight decay applied by the optimizer to every parameter.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub gradient_clip_norm: f64,
    pub max_epochs: usize,
    /// Epochs without reaching the best dev accuracy before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Threshold used only to report surviving transitions in the history.
    pub report_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            embedding_dropout: 0.0,
            recurrent_dropout: 0.0,
            vertical_dropout: 0.0,
            l2_classifier: 0.0,
            weight_decay: 1e-7,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            gradient_clip_norm: 1.0,
            max_epochs: 100,
            patience: 10,
            batch_size: 32,
            seed: 0,
            report_epsilon: DEFAULT_EPSILON,
        }
    }
}

fn check_range(name: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} = {value} is outside [{lo}, {hi}]")))
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("learning_rate", self.learning_rate, 7e-3, 0.5)?;
        check_range("embedding_dropout", self.embedding_dropout, 0.0, 0.5)?;
        check_range("recurrent_dropout", self.recurrent_dropout, 0.0, 0.5)?;
        check_range("vertical_dropout", self.vertical_dropout, 0.0, 0.5)?;
        check_range("l2_classifier", self.l2_classifier, 0.0, 0.5)?;
        check_range("weight_decay", self.weight_decay, 1e-7, 1e-5)?;
        check_range("beta1", self.beta1, 0.0, 1.0 - f64::EPSILON)?;
        check_range("beta2", self.beta2, 0.0, 1.0 - f64::EPSILON)?;
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::InvalidConfig("adam_epsilon must be positive".into()));
        }
        if !(self.gradient_clip_norm > 0.0) {
            return Err(Error::InvalidConfig("gradient_clip_norm must be positive".into()));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("max_epochs and batch_size must be positive".into()));
        }
        if !(self.report_epsilon >= 0.0) {
            return Err(Error::InvalidConfig("report_epsilon must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
            weight_decay: self.weight_decay,
        }
    }

    pub fn dropout(&self) -> Dropout {
        Dropout {
            embedding: self.embedding_dropout,
            recurrent: self.recurrent_dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean logistic loss over the epoch's minibatches.
    pub train_loss: f64,
    /// `lambda * sum_g sqrt(dim) ||w_g||` at the end of the epoch.
    pub penalty: f64,
    pub dev_accuracy: f64,
    pub surviving_transitions: usize,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    pub lambda: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        let best = self.best_epoch?;
        self.epochs.iter().find(|e| e.epoch == best)
    }
}

/// Fraction of examples the model classifies correctly.
pub fn accuracy(model: &RationalModel, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for ex in data {
        if model.predict(&ex.inputs)? == ex.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Mean logistic loss without dropout.
pub fn mean_loss(model: &RationalModel, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for ex in data {
        total += logistic_loss(model.logit(&ex.inputs)?, ex.label);
    }
    Ok(total / data.len() as f64)
}

/// Trains with the group-lasso penalty at strength `lambda` and a constant
/// learning rate. See [`train_with_clock`].
pub fn train(
    model: RationalModel,
    train_data: &[Example],
    dev_data: &[Example],
    config: &TrainConfig,
    lambda: f64,
) -> Result<(RationalModel, TrainHistory)> {
    train_with_clock(model, train_data, dev_data, config, lambda, &|| 0.0)
}

/// Minibatch subgradient Adam on mean logistic loss plus the penalty.
///
/// After every epoch the dev accuracy is measured. The returned parameters
/// are those of the last epoch that matched or beat the best dev accuracy
/// so far; training stops once `patience` consecutive epochs fall short of
/// it. `clock` supplies the wall-clock seconds recorded in the history.
///
/// A forward or optimizer overflow surfaces as [`Error::Diverged`] carrying
/// the history up to that point.
pub fn train_with_clock(
    mut model: RationalModel,
    train_data: &[Example],
    dev_data: &[Example],
    config: &TrainConfig,
    lambda: f64,
    clock: &dyn Fn() -> f64,
) -> Result<(RationalModel, TrainHistory)> {
    config.validate()?;
    let penalty_config = PenaltyConfig::new(lambda)?;
    if train_data.is_empty() || dev_data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let started = clock();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let adam = config.adam();
    let dropout = config.dropout();
    let mut state = AdamState::new(model.params().len());
    let mut grad = model.zeros_like();
    let mut order: Vec<usize> = (0..train_data.len()).collect();

    let mut history = TrainHistory {
        lambda,
        ..TrainHistory::default()
    };
    let mut best: Option<(f64, RationalModel)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        let diverged = |history: &TrainHistory, source: Error| Error::Diverged {
            epoch,
            history: Box::new(history.clone()),
            source: Box::new(source),
        };
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.params_mut().iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &idx in batch {
                let ex = &train_data[idx];
                let trace = if dropout.is_active() {
                    model.forward_with_dropout(&ex.inputs, dropout, &mut rng)
                } else {
                    model.forward(&ex.inputs)
                }
                .map_err(|e| diverged(&history, e))?;
                loss_sum += trace.loss(ex.label);
                model
                    .backward_into(&trace, ex.label, scale, &mut grad)
                    .map_err(|e| diverged(&history, e))?;
            }
            if config.l2_classifier > 0.0 {
                let weights = model.classifier_weight().to_vec();
                for (g, w) in grad.classifier_weight_mut().iter_mut().zip(weights) {
                    *g += config.l2_classifier * w;
                }
            }
            add_penalty_subgradient(&model, penalty_config, &mut grad);
            clip_global_norm(grad.params_mut(), config.gradient_clip_norm);
            adam_step(model.params_mut(), grad.params(), &mut state, &adam)
                .map_err(|e| diverged(&history, e))?;
        }

        let dev_accuracy = accuracy(&model, dev_data).map_err(|e| diverged(&history, e))?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_data.len() as f64,
            penalty: penalty(&model.group_view(), penalty_config),
            dev_accuracy,
            surviving_transitions: count_transitions(&structure_at(&model, config.report_epsilon)),
            elapsed_secs: clock() - started,
        };
        log::info!(
            "epoch={} loss={:.6} penalty={:.6} dev_acc={:.4} transitions={}",
            record.epoch,
            record.train_loss,
            record.penalty,
            record.dev_accuracy,
            record.surviving_transitions
        );
        if !(record.train_loss.is_finite() && record.penalty.is_finite()) {
            history.epochs.push(record);
            return Err(diverged(&history, Error::Overflow { timestep: 0 }));
        }
        history.epochs.push(record);

        if best.as_ref().is_none_or(|(acc, _)| dev_accuracy >= *acc) {
            best = Some((dev_accuracy, model.clone()));
            history.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    let (_, best_model) = best.expect("at least one epoch runs");
    Ok((best_model, history))
}

/// `lambda` that makes the penalty equal the mean training loss at initialization.
pub fn init_lambda_balance(model: &RationalModel, train_data: &[Example]) -> Result<f64> {
    let loss = mean_loss(model, train_data)?;
    let unscaled = unscaled_penalty(model.group_view().iter().map(|g| g.values));
    if unscaled == 0.0 {
        return Err(Error::ZeroPenalty);
    }
    Ok(loss / unscaled)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineOutcome {
    /// The compact model was finetuned.
    Finetuned,
    /// Every WFSA lost all of its states; the result is the bias-only model.
    AllStatesRemoved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub outcome: PipelineOutcome,
    pub model: RationalModel,
    pub structure: PrunedStructure,
    pub report: PruneReport,
    pub regularized: TrainHistory,
    pub finetune: Option<TrainHistory>,
}

/// Fit with the penalty, prune at `epsilon`, then finetune the compact model
/// with `lambda = 0` under the same configuration.
pub fn three_stage_pipeline(
    initial: RationalModel,
    train_data: &[Example],
    dev_data: &[Example],
    config: &TrainConfig,
    lambda: f64,
    epsilon: f64,
) -> Result<PipelineResult> {
    three_stage_pipeline_with_clock(initial, train_data, dev_data, config, lambda, epsilon, &|| 0.0)
}

pub fn three_stage_pipeline_with_clock(
    initial: RationalModel,
    train_data: &[Example],
    dev_data: &[Example],
    config: &TrainConfig,
    lambda: f64,
    epsilon: f64,
    clock: &dyn Fn() -> f64,
) -> Result<PipelineResult> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let (fitted, regularized) = train_with_clock(initial, train_data, dev_data, config, lambda, clock)?;
    let (structure, compact, report) = prune(&fitted, epsilon);
    if structure.is_empty() {
        return Ok(PipelineResult {
            outcome: PipelineOutcome::AllStatesRemoved,
            model: compact,
            structure,
            report,
            regularized,
            finetune: None,
        });
    }
    let (model, finetune) = train_with_clock(compact, train_data, dev_data, config, 0.0, clock)?;
    Ok(PipelineResult {
        outcome: PipelineOutcome::Finetuned,
        model,
        structure,
        report,
        regularized,
        finetune: Some(finetune),
    })
}
