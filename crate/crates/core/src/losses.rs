//! Softmax cross-entropy, triplet and center losses and their weighted sum.
//!
//! Every function returns the mean loss over the batch together with its
//! gradient.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights and switches of the hybrid loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda: f64,
    pub margin: f64,
    pub use_triplet: bool,
    pub use_center: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { lambda: 0.01, margin: 5.0, use_triplet: true, use_center: true }
    }
}

impl LossConfig {
    pub fn softmax_only() -> Self {
        LossConfig { use_triplet: false, use_center: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.margin >= 0.0) {
            return Err(Error::InvalidConfig("lambda and margin must be non-negative".into()));
        }
        Ok(())
    }

    /// Short variant name: `S`, `ST`, `SC` or `STC`.
    pub fn variant_name(&self) -> &'static str {
        match (self.use_triplet, self.use_center) {
            (false, false) => "S",
            (true, false) => "ST",
            (false, true) => "SC",
            (true, true) => "STC",
        }
    }

    /// Same weights with the switches of variant `S`, `ST`, `SC` or `STC`.
    pub fn with_variant(&self, name: &str) -> Result<Self> {
        let (use_triplet, use_center) = match name.to_ascii_uppercase().as_str() {
            "S" => (false, false),
            "ST" => (true, false),
            "SC" => (false, true),
            "STC" => (true, true),
            other => return Err(Error::InvalidConfig(format!("unknown loss variant {other:?}; expected S, ST, SC or STC"))),
        };
        Ok(LossConfig { use_triplet, use_center, ..self.clone() })
    }

    pub fn metric_active(&self) -> bool {
        self.lambda > 0.0 && (self.use_triplet || self.use_center)
    }
}

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().find(|&&y| y >= classes) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes }),
        None => Ok(()),
    }
}

/// Mean of `-log softmax(z)[y]`, stabilized by subtracting the row maximum.
pub fn softmax_ce(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (b, c) = logits.dim();
    if labels.len() != b {
        return Err(Error::LengthMismatch { left: b, right: labels.len() });
    }
    check_labels(labels, c)?;
    let mut grad = Array2::zeros((b, c));
    let mut total = 0.0;
    for (i, (row, mut g)) in logits.outer_iter().zip(grad.outer_iter_mut()).enumerate() {
        let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let mut z = 0.0;
        for (gj, &v) in g.iter_mut().zip(row) {
            *gj = (v - m).exp();
            z += *gj;
        }
        total += z.ln() - (row[labels[i]] - m);
        g.mapv_inplace(|p| p / z / b as f64);
        g[labels[i]] -= 1.0 / b as f64;
    }
    Ok((total / b as f64, grad))
}

fn norm_and_unit(d: &Array1<f64>) -> (f64, Array1<f64>) {
    let n = d.dot(d).sqrt();
    if n > 0.0 {
        (n, d / n)
    } else {
        (0.0, Array1::zeros(d.len()))
    }
}

/// Gradients of one triplet with respect to anchor, positive and negative.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrads {
    pub anchor: Array1<f64>,
    pub positive: Array1<f64>,
    pub negative: Array1<f64>,
}

/// `max(|p - a| - |n - a| + margin, 0)` with unsquared Euclidean distances.
pub fn triplet_loss(anchor: ArrayView1<f64>, positive: ArrayView1<f64>, negative: ArrayView1<f64>, margin: f64) -> Result<(f64, TripletGrads)> {
    let dim = anchor.len();
    if positive.len() != dim || negative.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "triplet dimensions {} / {} / {}",
            dim,
            positive.len(),
            negative.len()
        )));
    }
    let (dp, up) = norm_and_unit(&(&positive - &anchor));
    let (dn, un) = norm_and_unit(&(&negative - &anchor));
    let loss = dp - dn + margin;
    if loss > 0.0 {
        Ok((loss, TripletGrads { anchor: &un - &up, positive: up, negative: -un }))
    } else {
        let z = Array1::zeros(dim);
        Ok((0.0, TripletGrads { anchor: z.clone(), positive: z.clone(), negative: z }))
    }
}

/// Mean triplet loss over index triplets into `features`; the gradient has
/// the shape of `features`.
pub fn batch_triplet_loss(features: &Array2<f64>, triplets: &[(usize, usize, usize)], margin: f64) -> Result<(f64, Array2<f64>)> {
    let mut grad = Array2::zeros(features.raw_dim());
    if triplets.is_empty() {
        return Ok((0.0, grad));
    }
    let n = features.nrows();
    let scale = 1.0 / triplets.len() as f64;
    let mut total = 0.0;
    for &(a, p, q) in triplets {
        if let Some(&bad) = [a, p, q].iter().find(|&&i| i >= n) {
            return Err(Error::ShapeMismatch(format!("triplet index {bad} out of range for {n} rows")));
        }
        let (l, g) = triplet_loss(features.row(a), features.row(p), features.row(q), margin)?;
        total += l;
        grad.row_mut(a).scaled_add(scale, &g.anchor);
        grad.row_mut(p).scaled_add(scale, &g.positive);
        grad.row_mut(q).scaled_add(scale, &g.negative);
    }
    Ok((total * scale, grad))
}

/// `1/2 * mean |f - c_y|^2`. Centers are treated as constants here.
pub fn center_loss(features: &Array2<f64>, labels: &[usize], centers: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let b = features.nrows();
    if labels.len() != b {
        return Err(Error::LengthMismatch { left: b, right: labels.len() });
    }
    if centers.ncols() != features.ncols() {
        return Err(Error::ShapeMismatch(format!("center dim {} != feature dim {}", centers.ncols(), features.ncols())));
    }
    check_labels(labels, centers.nrows())?;
    let mut grad = features.clone();
    let mut total = 0.0;
    for (mut row, &y) in grad.outer_iter_mut().zip(labels) {
        row -= &centers.row(y);
        total += 0.5 * row.dot(&row);
        row /= b as f64;
    }
    Ok((total / b as f64, grad))
}

/// Component values and the combined gradient of the hybrid loss.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridLoss {
    pub total: f64,
    pub softmax: f64,
    pub triplet: Option<f64>,
    pub center: Option<f64>,
    pub grad_logits: Array2<f64>,
    /// `None` when no metric term contributes.
    pub grad_features: Option<Array2<f64>>,
}

/// Precomputed loss terms, combined by [`combine`].
#[derive(Debug, Clone, PartialEq)]
pub struct LossParts {
    pub softmax: (f64, Array2<f64>),
    pub triplet: Option<(f64, Array2<f64>)>,
    pub center: Option<(f64, Array2<f64>)>,
}

/// `L = L_softmax + lambda * (enabled triplet + enabled center)`.
pub fn combine(parts: LossParts, config: &LossConfig) -> HybridLoss {
    let (softmax, grad_logits) = parts.softmax;
    let triplet = parts.triplet.filter(|_| config.use_triplet);
    let center = parts.center.filter(|_| config.use_center);
    let mut total = softmax;
    let mut grad_features: Option<Array2<f64>> = None;
    for (value, grad) in [&triplet, &center].into_iter().flatten() {
        total += config.lambda * value;
        if config.lambda != 0.0 {
            match grad_features.as_mut() {
                Some(acc) => acc.scaled_add(config.lambda, grad),
                None => grad_features = Some(grad * config.lambda),
            }
        }
    }
    HybridLoss {
        total,
        softmax,
        triplet: triplet.map(|t| t.0),
        center: center.map(|c| c.0),
        grad_logits,
        grad_features,
    }
}

/// Evaluates every enabled term for a batch and combines them.
pub fn hybrid_loss(
    features: &Array2<f64>,
    logits: &Array2<f64>,
    labels: &[usize],
    centers: &Array2<f64>,
    triplets: &[(usize, usize, usize)],
    config: &LossConfig,
) -> Result<HybridLoss> {
    let softmax = softmax_ce(logits, labels)?;
    let triplet = if config.use_triplet { Some(batch_triplet_loss(features, triplets, config.margin)?) } else { None };
    let center = if config.use_center { Some(center_loss(features, labels, centers)?) } else { None };
    Ok(combine(LossParts { softmax, triplet, center }, config))
}

/// Row-wise softmax probabilities.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    out
}
