//! Online few-shot identification with frozen embeddings.
//!
//! An episode embeds a few labelled bursts per new emitter with every
//! ensemble member, fits one logistic-regression classifier per member, and
//! classifies the test bursts by the argmax of the averaged class
//! probabilities. [`monte_carlo`] repeats episodes with fresh training shots
//! over one fixed set of classes and test bursts.

mod classifier;
mod episode;
mod stats;

pub use classifier::{ensemble_predict, fit_lr, fit_lr_traced, lr_objective, predict, LinearClassifier, LrConfig, Standardize};
pub use episode::{split_fewshot, FewShotPlan};
pub use stats::{quantile_sorted, MonteCarloStats};

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex_nn::EmbeddingModel;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, confusion};
use crate::rng::substream;
use crate::signal_sim::{ComplexSignal, LabeledDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FewShotConfig {
    pub ways: usize,
    pub shots: usize,
    pub test_per_class: usize,
    pub trials: usize,
    /// Number of ensemble members expected by [`monte_carlo`].
    pub ensemble_size: usize,
    pub lr: LrConfig,
    pub seed: u64,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        FewShotConfig { ways: 10, shots: 5, test_per_class: 50, trials: 50, ensemble_size: 1, lr: LrConfig::default(), seed: 0 }
    }
}

impl FewShotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ways < 2 || self.shots < 1 || self.test_per_class < 1 || self.trials < 1 || self.ensemble_size < 1 {
            return Err(Error::InvalidConfig(
                "need ways >= 2, shots >= 1, test_per_class >= 1, trials >= 1, ensemble_size >= 1".into(),
            ));
        }
        if !(self.lr.step > 0.0) || !(self.lr.reg >= 0.0) {
            return Err(Error::InvalidConfig("lr step must be > 0 and reg >= 0".into()));
        }
        Ok(())
    }
}

/// Anything that maps bursts to fixed-length real feature vectors.
pub trait FeatureExtractor: Sync {
    fn feature_dim(&self) -> usize;
    fn extract(&self, signals: &[ComplexSignal]) -> Result<Array2<f64>>;
}

impl FeatureExtractor for EmbeddingModel {
    fn feature_dim(&self) -> usize {
        EmbeddingModel::feature_dim(self)
    }

    fn extract(&self, signals: &[ComplexSignal]) -> Result<Array2<f64>> {
        self.embed_all(signals)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

/// Classifies `test` feature sets (one per member) after fitting one
/// classifier per member on the matching `train` set.
pub fn episode_from_features(
    train: &[Array2<f64>],
    train_labels: &[usize],
    test: &[Array2<f64>],
    test_labels: &[usize],
    ways: usize,
    lr: &LrConfig,
) -> Result<EpisodeResult> {
    if train.is_empty() || train.len() != test.len() {
        return Err(Error::LengthMismatch { left: train.len(), right: test.len() });
    }
    let mut mean: Option<Array2<f64>> = None;
    for (tr, te) in train.iter().zip(test) {
        let clf = fit_lr(tr, train_labels, ways, lr)?;
        let p = clf.predict_proba(te)?;
        match mean.as_mut() {
            Some(m) => *m += &p,
            None => mean = Some(p),
        }
    }
    let mean = mean.expect("at least one member") / train.len() as f64;
    let predictions: Vec<usize> = mean.axis_iter(Axis(0)).map(|row| predict(row.as_slice().expect("row-major"))).collect();
    Ok(EpisodeResult {
        accuracy: accuracy(&predictions, test_labels)?,
        confusion: confusion(&predictions, test_labels, ways)?,
        predictions,
    })
}

/// One episode on explicit few-shot training and test sets.
pub fn run_episode(members: &[&dyn FeatureExtractor], d_tr: &LabeledDataset, d_te: &LabeledDataset, lr: &LrConfig) -> Result<EpisodeResult> {
    check_members(members)?;
    let mut train = Vec::with_capacity(members.len());
    let mut test = Vec::with_capacity(members.len());
    for m in members {
        train.push(m.extract(&d_tr.signals)?);
        test.push(m.extract(&d_te.signals)?);
    }
    episode_from_features(&train, &d_tr.labels, &test, &d_te.labels, d_tr.class_count, lr)
}

fn check_members(members: &[&dyn FeatureExtractor]) -> Result<()> {
    let first = members.first().ok_or_else(|| Error::InsufficientData("ensemble has no members".into()))?;
    if let Some(m) = members.iter().find(|m| m.feature_dim() != first.feature_dim()) {
        return Err(Error::ShapeMismatch(format!(
            "ensemble members disagree on feature dimension ({} vs {})",
            first.feature_dim(),
            m.feature_dim()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub stats: MonteCarloStats,
    /// Pool labels of the evaluated classes.
    pub classes: Vec<usize>,
    /// Confusion matrix summed over all trials.
    pub confusion: Vec<Vec<usize>>,
}

/// Pool features of each member, computed once in eval mode.
pub struct FeatureCache {
    features: Vec<Array2<f64>>,
}

impl FeatureCache {
    pub fn new(members: &[&dyn FeatureExtractor], pool: &LabeledDataset) -> Result<Self> {
        check_members(members)?;
        let features = members.iter().map(|m| m.extract(&pool.signals)).collect::<Result<_>>()?;
        Ok(FeatureCache { features })
    }

    pub fn members(&self) -> usize {
        self.features.len()
    }

    pub fn member(&self, m: usize) -> &Array2<f64> {
        &self.features[m]
    }

    /// Rows `idx` of member `m`'s features.
    pub fn rows_of(&self, m: usize, idx: &[usize]) -> Array2<f64> {
        self.features[m].select(Axis(0), idx)
    }

    fn rows(&self, idx: &[usize]) -> Vec<Array2<f64>> {
        self.features.iter().map(|f| f.select(Axis(0), idx)).collect()
    }
}

/// Runs `config.trials` episodes. The classes and test bursts are drawn
/// once from substream 0 of the seed; trial `t` draws its shots from
/// substream `t + 1`. Trials run in parallel and are reported in order.
pub fn monte_carlo(members: &[&dyn FeatureExtractor], pool: &LabeledDataset, config: &FewShotConfig) -> Result<MonteCarloResult> {
    config.validate()?;
    if members.len() != config.ensemble_size {
        return Err(Error::ConfigMismatch(format!(
            "ensemble_size is {} but {} members were given",
            config.ensemble_size,
            members.len()
        )));
    }
    let plan = FewShotPlan::for_config(pool, config)?;
    let cache = FeatureCache::new(members, pool)?;
    monte_carlo_cached(&cache, &plan, config)
}

/// [`monte_carlo`] on precomputed pool features.
pub fn monte_carlo_cached(cache: &FeatureCache, plan: &FewShotPlan, config: &FewShotConfig) -> Result<MonteCarloResult> {
    let test = cache.rows(&plan.test);
    let results: Vec<EpisodeResult> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let (idx, labels) = plan.draw_train(&mut substream(config.seed, t as u64 + 1));
            episode_from_features(&cache.rows(&idx), &labels, &test, &plan.test_labels, plan.ways(), &config.lr)
        })
        .collect::<Result<_>>()?;
    let ways = plan.ways();
    let mut total = vec![vec![0usize; ways]; ways];
    for r in &results {
        for (row, add) in total.iter_mut().zip(&r.confusion) {
            for (a, b) in row.iter_mut().zip(add) {
                *a += b;
            }
        }
    }
    Ok(MonteCarloResult {
        stats: MonteCarloStats::from_accuracies(results.iter().map(|r| r.accuracy).collect()),
        classes: plan.classes.clone(),
        confusion: total,
    })
}
