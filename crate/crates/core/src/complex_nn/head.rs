use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::tensor::CTensor;
use super::Mode;
use crate::error::{Error, Result};

/// Real-valued head after the flatten: `Dense(feature_dim) + ReLU +
/// Dropout`, followed by the auxiliary-class classifier used by the
/// softmax loss.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHeadParams {
    /// `[flat_dim, feature_dim]`
    pub dense_weight: Array2<f64>,
    pub dense_bias: Array1<f64>,
    pub dropout_rate: f64,
    /// `[feature_dim, class_count]`
    pub classifier_weight: Array2<f64>,
    pub classifier_bias: Array1<f64>,
}

fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("valid bounds");
    Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng))
}

impl DenseHeadParams {
    pub fn init<R: Rng + ?Sized>(
        flat_dim: usize,
        feature_dim: usize,
        class_count: usize,
        dropout_rate: f64,
        rng: &mut R,
    ) -> Self {
        assert!((0.0..1.0).contains(&dropout_rate), "dropout rate must lie in [0, 1)");
        DenseHeadParams {
            dense_weight: glorot(flat_dim, feature_dim, rng),
            dense_bias: Array1::zeros(feature_dim),
            dropout_rate,
            classifier_weight: glorot(feature_dim, class_count, rng),
            classifier_bias: Array1::zeros(class_count),
        }
    }

    pub fn flat_dim(&self) -> usize {
        self.dense_weight.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.dense_weight.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.classifier_weight.ncols()
    }
}

/// Per sample: all real parts (row-major over time, channel) followed by
/// all imaginary parts.
pub fn flatten(input: &CTensor) -> Array2<f64> {
    let (b_n, len, ch) = (input.batch(), input.len(), input.channels());
    let half = len * ch;
    Array2::from_shape_fn((b_n, 2 * half), |(b, j)| {
        let (plane, j) = if j < half { (&input.re, j) } else { (&input.im, j - half) };
        plane[[b * len + j / ch, j % ch]]
    })
}

fn unflatten(flat: &Array2<f64>, len: usize, ch: usize) -> CTensor {
    let b_n = flat.nrows();
    let half = len * ch;
    let mut t = CTensor::zeros(b_n, len, ch);
    for b in 0..b_n {
        for j in 0..half {
            t.re[[b * len + j / ch, j % ch]] = flat[[b, j]];
            t.im[[b * len + j / ch, j % ch]] = flat[[b, half + j]];
        }
    }
    t
}

#[derive(Debug, Clone)]
pub struct HeadOutput {
    /// `ReLU(dense)`, before dropout.
    pub features: Array2<f64>,
    /// Features after inverted dropout; equal to `features` in eval mode.
    pub dropped: Array2<f64>,
    pub logits: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    flat: Array2<f64>,
    pre: Array2<f64>,
    dropped: Array2<f64>,
    mask: Option<Array2<f64>>,
    len: usize,
    channels: usize,
}

pub fn flatten_and_head<R: Rng + ?Sized>(
    input: &CTensor,
    head: &DenseHeadParams,
    mode: Mode,
    rng: &mut R,
) -> Result<(HeadOutput, HeadCache)> {
    let flat = flatten(input);
    if flat.ncols() != head.flat_dim() {
        return Err(Error::ShapeMismatch(format!(
            "flatten produced {} values, dense layer expects {}",
            flat.ncols(),
            head.flat_dim()
        )));
    }
    let pre = flat.dot(&head.dense_weight) + &head.dense_bias;
    let features = pre.mapv(|v| v.max(0.0));
    let (dropped, mask) = match mode {
        Mode::Train if head.dropout_rate > 0.0 => {
            let keep = 1.0 / (1.0 - head.dropout_rate);
            let mask = Array2::from_shape_simple_fn(features.dim(), || {
                if rng.random::<f64>() < head.dropout_rate {
                    0.0
                } else {
                    keep
                }
            });
            (&features * &mask, Some(mask))
        }
        _ => (features.clone(), None),
    };
    let logits = dropped.dot(&head.classifier_weight) + &head.classifier_bias;
    let cache = HeadCache { flat, pre, dropped: dropped.clone(), mask, len: input.len(), channels: input.channels() };
    Ok((HeadOutput { features, dropped, logits }, cache))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub dense_weight: Array2<f64>,
    pub dense_bias: Array1<f64>,
    pub classifier_weight: Array2<f64>,
    pub classifier_bias: Array1<f64>,
}

/// `grad_features` is the gradient reaching the pre-dropout features from
/// the metric losses; `grad_logits` comes from the softmax loss.
pub fn head_backward(
    head: &DenseHeadParams,
    cache: &HeadCache,
    grad_features: Option<&Array2<f64>>,
    grad_logits: &Array2<f64>,
) -> Result<(CTensor, HeadGrads)> {
    if grad_logits.dim() != (cache.flat.nrows(), head.class_count()) {
        return Err(Error::ShapeMismatch("logit gradient shape".into()));
    }
    let classifier_weight = cache.dropped.t().dot(grad_logits);
    let classifier_bias = grad_logits.sum_axis(Axis(0));
    let mut g_feat = grad_logits.dot(&head.classifier_weight.t());
    if let Some(mask) = &cache.mask {
        g_feat *= mask;
    }
    if let Some(gf) = grad_features {
        if gf.dim() != g_feat.dim() {
            return Err(Error::ShapeMismatch("feature gradient shape".into()));
        }
        g_feat += gf;
    }
    ndarray::Zip::from(&mut g_feat).and(&cache.pre).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0
        }
    });
    let dense_weight = cache.flat.t().dot(&g_feat);
    let dense_bias = g_feat.sum_axis(Axis(0));
    let g_flat = g_feat.dot(&head.dense_weight.t());
    let grad_in = unflatten(&g_flat, cache.len, cache.channels);
    Ok((grad_in, HeadGrads { dense_weight, dense_bias, classifier_weight, classifier_bias }))
}
