use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::softmax_rows;

/// Multinomial logistic regression `softmax(x W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    /// `[feature_dim, classes]`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Input scaling applied by [`fit_lr`] after centering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    /// One factor for all features: the inverse RMS row norm.
    #[default]
    Global,
    /// Each feature divided by its own standard deviation.
    PerFeature,
}

/// Gradient-descent settings for [`fit_lr`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrConfig {
    pub step: f64,
    pub iters: usize,
    pub reg: f64,
    pub standardize: Standardize,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig { step: 0.1, iters: 500, reg: 1e-4, standardize: Standardize::Global }
    }
}

impl LinearClassifier {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        LinearClassifier { weight: Array2::zeros((dim, classes)), bias: Array1::zeros(classes) }
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn logits(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.weight.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "classifier expects {} features, got {}",
                self.weight.nrows(),
                features.ncols()
            )));
        }
        Ok(features.dot(&self.weight) + &self.bias)
    }

    /// Row-wise class probabilities.
    pub fn predict_proba(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(softmax_rows(&self.logits(features)?))
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn predict(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Argmax of the mean of several distributions over the same classes.
pub fn ensemble_predict(dists: &[&[f64]]) -> Result<usize> {
    let first = dists.first().ok_or_else(|| Error::InsufficientData("ensemble has no members".into()))?;
    let mut mean = vec![0.0; first.len()];
    for d in dists {
        if d.len() != mean.len() {
            return Err(Error::LengthMismatch { left: mean.len(), right: d.len() });
        }
        for (m, &v) in mean.iter_mut().zip(d.iter()) {
            *m += v;
        }
    }
    let m = dists.len() as f64;
    mean.iter_mut().for_each(|v| *v /= m);
    Ok(predict(&mean))
}

/// Mean negative log-likelihood plus `reg * |W|^2 / 2` of a classifier.
pub fn lr_objective(clf: &LinearClassifier, features: &Array2<f64>, labels: &[usize], reg: f64) -> Result<f64> {
    let (nll, _) = crate::losses::softmax_ce(&clf.logits(features)?, labels)?;
    Ok(nll + 0.5 * reg * clf.weight.mapv(|w| w * w).sum())
}

/// Fits a `classes`-way classifier by full-batch gradient descent from
/// zero. Features are centered and rescaled per [`Standardize`] before
/// fitting; the returned weights act on the raw features.
pub fn fit_lr(features: &Array2<f64>, labels: &[usize], classes: usize, config: &LrConfig) -> Result<LinearClassifier> {
    fit_lr_traced(features, labels, classes, config).map(|(c, _)| c)
}

/// [`fit_lr`] that also returns the objective (on the standardized
/// features) before every step and after the last one.
pub fn fit_lr_traced(features: &Array2<f64>, labels: &[usize], classes: usize, config: &LrConfig) -> Result<(LinearClassifier, Vec<f64>)> {
    let (n, d) = features.dim();
    if labels.len() != n {
        return Err(Error::LengthMismatch { left: n, right: labels.len() });
    }
    if n < classes || classes < 2 {
        return Err(Error::InsufficientData(format!("{n} training samples for {classes} classes")));
    }
    let mean = features.mean_axis(Axis(0)).expect("non-empty");
    let centered = features - &mean;
    let inv = |s: f64| if s > 0.0 { 1.0 / s } else { 1.0 };
    let scale: Array1<f64> = match config.standardize {
        Standardize::Global => Array1::from_elem(d, inv((centered.mapv(|v| v * v).sum() / n as f64).sqrt())),
        Standardize::PerFeature => centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty").mapv(|v| inv(v.sqrt())),
    };
    let z = &centered * &scale;

    let mut clf = LinearClassifier::zeros(d, classes);
    let mut trace = Vec::with_capacity(config.iters + 1);
    for it in 0..=config.iters {
        let (nll, grad_logits) = crate::losses::softmax_ce(&clf.logits(&z)?, labels)?;
        let objective = nll + 0.5 * config.reg * clf.weight.mapv(|w| w * w).sum();
        if !objective.is_finite() {
            return Err(Error::NonFiniteLoss { context: format!("logistic regression iteration {it}") });
        }
        trace.push(objective);
        if it == config.iters {
            break;
        }
        let gw = z.t().dot(&grad_logits) + &(&clf.weight * config.reg);
        let gb = grad_logits.sum_axis(Axis(0));
        clf.weight.scaled_add(-config.step, &gw);
        clf.bias.scaled_add(-config.step, &gb);
    }
    let weight = &clf.weight * &scale.insert_axis(Axis(1));
    let bias = &clf.bias - &mean.dot(&weight);
    Ok((LinearClassifier { weight, bias }, trace))
}
