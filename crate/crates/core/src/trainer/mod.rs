//! Offline training of the embedding on auxiliary emitters.
//!
//! Each step draws a class-balanced batch, runs the network in train mode,
//! evaluates the hybrid loss, takes a plain SGD step and then moves the
//! class centers toward the batch features.

mod centers;
mod checkpoint;
mod sampler;

pub use centers::update_centers;
pub use checkpoint::{
    check_config, checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, load_checkpoint_expecting, save_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use sampler::{mine_triplets, BatchSampler};

use serde::{Deserialize, Serialize};

use crate::complex_nn::{CTensor, EmbeddingModel, Mode, ModelConfig};
use crate::error::{Error, Result};
use crate::losses::{center_loss, hybrid_loss, softmax_ce, LossConfig};
use crate::rng::{substream, SeiRng};
use crate::signal_sim::{ComplexSignal, DatasetRole, LabeledDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub eta: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub classes_per_batch: usize,
    pub samples_per_class_in_batch: usize,
    /// Share of each auxiliary class held out for validation telemetry.
    pub val_fraction: f64,
    pub loss: LossConfig,
    pub model: ModelConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.001,
            alpha: 0.001,
            epochs: 200,
            batch_size: 32,
            classes_per_batch: 8,
            samples_per_class_in_batch: 4,
            val_fraction: 0.3,
            loss: LossConfig::default(),
            model: ModelConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Settings for a short single-workstation run: 30 epochs, with larger
    /// step sizes so SGD makes comparable progress in that budget.
    pub fn desk() -> Self {
        TrainConfig { epochs: 30, eta: 0.05, alpha: 0.5, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.classes_per_batch * self.samples_per_class_in_batch != self.batch_size {
            return bad(format!(
                "classes_per_batch ({}) x samples_per_class_in_batch ({}) must equal batch_size ({})",
                self.classes_per_batch, self.samples_per_class_in_batch, self.batch_size
            ));
        }
        if !(self.eta > 0.0) || !(self.alpha > 0.0) {
            return bad("eta and alpha must be > 0".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must lie in [0, 1)".into());
        }
        if self.loss.use_triplet && self.samples_per_class_in_batch < 2 {
            return bad("triplet mining needs samples_per_class_in_batch >= 2".into());
        }
        self.loss.validate()?;
        self.model.validate()
    }
}

/// Mean loss components over a dataset or an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub total: f64,
    pub softmax: f64,
    pub triplet: Option<f64>,
    pub center: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTelemetry {
    pub epoch: usize,
    pub train: LossSummary,
    pub val: Option<LossSummary>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    pub telemetry: Vec<EpochTelemetry>,
}

const EVAL_CHUNK: usize = 64;

/// Eval-mode hybrid loss over a whole dataset, with triplets mined over all
/// of it using `mining_seed`.
pub fn evaluate_loss(model: &EmbeddingModel, data: &LabeledDataset, loss: &LossConfig, mining_seed: u64) -> Result<LossSummary> {
    if data.is_empty() {
        return Err(Error::InsufficientData("cannot evaluate the loss of an empty dataset".into()));
    }
    let mut unused = substream(0, 0);
    let n = data.len();
    let f_dim = model.feature_dim();
    let mut features = ndarray::Array2::zeros((n, f_dim));
    let mut logits = ndarray::Array2::zeros((n, model.config.class_count));
    for start in (0..n).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(n);
        let refs: Vec<&ComplexSignal> = data.signals[start..end].iter().collect();
        let fwd = model.forward(&CTensor::from_signals(&refs)?, Mode::Eval, &mut unused, false)?;
        features.slice_mut(ndarray::s![start..end, ..]).assign(&fwd.features);
        logits.slice_mut(ndarray::s![start..end, ..]).assign(&fwd.logits);
    }
    let softmax = softmax_ce(&logits, &data.labels)?.0;
    let triplet = if loss.use_triplet {
        match mine_triplets(&data.labels, &mut substream(mining_seed, 0)) {
            Ok(t) => Some(crate::losses::batch_triplet_loss(&features, &t, loss.margin)?.0),
            Err(Error::NoValidTriplet(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let center = if loss.use_center { Some(center_loss(&features, &data.labels, &model.centers)?.0) } else { None };
    let total = softmax + loss.lambda * (triplet.unwrap_or(0.0) + center.unwrap_or(0.0));
    Ok(LossSummary { total, softmax, triplet, center })
}

#[derive(Default)]
struct Accumulator {
    steps: usize,
    total: f64,
    softmax: f64,
    triplet: f64,
    center: f64,
}

impl Accumulator {
    fn summary(&self, loss: &LossConfig) -> LossSummary {
        let k = self.steps.max(1) as f64;
        LossSummary {
            total: self.total / k,
            softmax: self.softmax / k,
            triplet: loss.use_triplet.then_some(self.triplet / k),
            center: loss.use_center.then_some(self.center / k),
        }
    }
}

pub fn train_embedding(aux: &LabeledDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_embedding_with(aux, config, |_| {})
}

/// Like [`train_embedding`], calling `on_epoch` after every epoch.
pub fn train_embedding_with<F: FnMut(&EpochTelemetry)>(aux: &LabeledDataset, config: &TrainConfig, mut on_epoch: F) -> Result<TrainOutcome> {
    config.validate()?;
    if aux.role != DatasetRole::Auxiliary {
        return Err(Error::InvalidConfig(format!("training needs an auxiliary dataset, got {:?}", aux.role)));
    }
    if aux.class_count != config.model.class_count {
        return Err(Error::ConfigMismatch(format!(
            "dataset has {} classes, model is configured for {}",
            aux.class_count, config.model.class_count
        )));
    }
    if aux.signal_len() != config.model.signal_len {
        return Err(Error::ConfigMismatch(format!(
            "dataset signals have length {}, model expects {}",
            aux.signal_len(),
            config.model.signal_len
        )));
    }

    let (train_idx, val_idx) = if config.val_fraction > 0.0 {
        aux.split_per_class(1.0 - config.val_fraction, &mut substream(config.seed, 1))
    } else {
        ((0..aux.len()).collect(), Vec::new())
    };
    let train = aux.subset(&train_idx, DatasetRole::Auxiliary)?;
    let val = if val_idx.is_empty() { None } else { Some(aux.subset(&val_idx, DatasetRole::Auxiliary)?) };

    let mut model = EmbeddingModel::new(config.model.clone(), &mut substream(config.seed, 2))?;
    let sampler = BatchSampler::new(&train.labels, train.class_count, config.classes_per_batch, config.samples_per_class_in_batch)?;
    let mut batch_rng: SeiRng = substream(config.seed, 3);
    let mut dropout_rng: SeiRng = substream(config.seed, 4);
    let mut mining_rng: SeiRng = substream(config.seed, 5);
    let mut telemetry = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let batches = sampler.epoch(&mut batch_rng);
        let mut acc = Accumulator::default();
        for (bi, batch) in batches.iter().enumerate() {
            let refs: Vec<&ComplexSignal> = batch.iter().map(|&i| &train.signals[i]).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let fwd = model.forward(&CTensor::from_signals(&refs)?, Mode::Train, &mut dropout_rng, true)?;
            let triplets = if config.loss.use_triplet { mine_triplets(&labels, &mut mining_rng)? } else { Vec::new() };
            let loss = hybrid_loss(&fwd.features, &fwd.logits, &labels, &model.centers, &triplets, &config.loss)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFiniteLoss { context: format!("epoch {epoch}, batch {bi}: loss {}", loss.total) });
            }
            let grads = model.backward(&fwd, loss.grad_features.as_ref(), &loss.grad_logits)?;
            model.apply_sgd(&grads, config.eta)?;
            model.update_running_stats(&fwd);
            if config.loss.use_center {
                update_centers(&mut model.centers, &fwd.features, &labels, config.alpha)?;
            }
            acc.steps += 1;
            acc.total += loss.total;
            acc.softmax += loss.softmax;
            acc.triplet += loss.triplet.unwrap_or(0.0);
            acc.center += loss.center.unwrap_or(0.0);
        }
        if acc.steps == 0 {
            return Err(Error::InsufficientClassData("an epoch produced no batches".into()));
        }
        let val = match &val {
            Some(v) => Some(evaluate_loss(&model, v, &config.loss, config.seed ^ 0x7a1)?),
            None => None,
        };
        let entry = EpochTelemetry { epoch: epoch + 1, train: acc.summary(&config.loss), val };
        log::info!(
            "epoch {}/{}: train {:.5}, val {}",
            entry.epoch,
            config.epochs,
            entry.train.total,
            entry.val.map_or("-".to_string(), |v| format!("{:.5}", v.total))
        );
        on_epoch(&entry);
        telemetry.push(entry);
    }
    Ok(TrainOutcome { model, telemetry })
}
