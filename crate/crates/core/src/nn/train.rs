use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{clip_global_norm, rmsprop_step, RnnModel, Sample, TargetStats};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global gradient-norm ceiling applied before each update.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-7,
            batch_size: 32,
            epochs: 10,
            seed: 0,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(
                "learning_rate and epsilon must be positive".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidArgument("rho must be in (0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the per-batch losses seen during the epoch.
    pub loss: f64,
    pub accuracy: f64,
    pub head_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub stats: TargetStats,
}

/// Minibatch RMSProp over `dataset`, reshuffled each epoch from the seeded
/// RNG. With `epochs = 0` the model is left untouched.
pub fn train(model: &mut RnnModel, dataset: &[Sample], config: &TrainConfig) -> Result<Vec<EpochStats>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    (0..config.epochs)
        .map(|epoch| run_epoch(model, dataset, &mut order, &mut rng, config, epoch))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedTraining {
    pub history: Vec<EpochStats>,
    pub validation_loss: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Same update sequence as [`train`], but after every epoch the model is
/// scored on `validation` and the lowest-loss parameters are restored at
/// the end. `validation` never contributes gradients.
pub fn train_selected(
    model: &mut RnnModel,
    dataset: &[Sample],
    validation: &[Sample],
    config: &TrainConfig,
) -> Result<SelectedTraining> {
    config.validate()?;
    if dataset.is_empty() || validation.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut best = (evaluate(model, validation, config.batch_size)?.loss, 0, model.clone());
    let mut history = Vec::with_capacity(config.epochs);
    let mut validation_loss = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        history.push(run_epoch(model, dataset, &mut order, &mut rng, config, epoch)?);
        let loss = evaluate(model, validation, config.batch_size)?.loss;
        validation_loss.push(loss);
        if loss < best.0 {
            best = (loss, epoch + 1, model.clone());
        }
    }
    *model = best.2;
    Ok(SelectedTraining {
        history,
        validation_loss,
        best_epoch: best.1,
    })
}

fn run_epoch(
    model: &mut RnnModel,
    dataset: &[Sample],
    order: &mut [usize],
    rng: &mut ChaCha8Rng,
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    order.shuffle(rng);
    let mut loss_sum = 0.0;
    let mut weight = 0usize;
    let mut stats = TargetStats::default();
    for chunk in order.chunks(config.batch_size) {
        let batch: Vec<Sample> = chunk.iter().map(|&i| dataset[i].clone()).collect();
        let (out, mut grads) = model.loss_and_gradients(&batch)?;
        clip_global_norm(&mut grads, config.clip_norm);
        rmsprop_step(model, &grads, config);
        loss_sum += out.loss * batch.len() as f64;
        weight += batch.len();
        stats.merge(&out.stats);
    }
    Ok(EpochStats {
        epoch: epoch + 1,
        loss: loss_sum / weight as f64,
        accuracy: stats.overall_accuracy(),
        head_accuracy: (0..stats.total.len()).map(|h| stats.head_accuracy(h)).collect(),
    })
}

/// Loss and per-head accuracy of `model` on `dataset` (no updates).
pub fn evaluate(model: &RnnModel, dataset: &[Sample], batch_size: usize) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut loss = 0.0;
    let mut stats = TargetStats::default();
    for chunk in dataset.chunks(batch_size.max(1)) {
        let out = model.batch_loss(chunk)?;
        loss += out.loss * chunk.len() as f64;
        stats.merge(&out.stats);
    }
    Ok(Evaluation {
        loss: loss / dataset.len() as f64,
        stats,
    })
}
