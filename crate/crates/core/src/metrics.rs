//! Accuracy, confusion matrices, the silhouette coefficient and a 2-D PCA
//! projection of feature clouds.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

/// Fraction of positions where `pred` equals `truth`.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Err(Error::InsufficientData("accuracy of an empty prediction list".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// `m[i][j]` counts samples of true class `i` predicted as `j`.
pub fn confusion(pred: &[usize], truth: &[usize], classes: usize) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    let mut m = vec![vec![0usize; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if let Some(&label) = [p, t].iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        m[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub sc: f64,
    pub per_sample_s: Vec<f64>,
    pub n: usize,
}

/// Silhouette coefficient where the intra term is the mean distance to the
/// other members of a sample's class and the inter term is the distance to
/// the nearest sample of any other class.
pub fn silhouette(features: &Array2<f64>, labels: &[usize]) -> Result<SilhouetteReport> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::LengthMismatch { left: n, right: labels.len() });
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::TooFewClasses { found: counts.len() });
    }
    if let Some((&label, _)) = counts.iter().find(|(_, &c)| c < 2) {
        return Err(Error::SingletonClass { label });
    }
    let per_sample_s: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let fj = features.row(j);
            let mut intra = 0.0;
            let mut inter = f64::INFINITY;
            for (k, fk) in features.outer_iter().enumerate() {
                if k == j {
                    continue;
                }
                let d = fj.iter().zip(fk.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if labels[k] == labels[j] {
                    intra += d;
                } else {
                    inter = inter.min(d);
                }
            }
            intra /= (counts[&labels[j]] - 1) as f64;
            let denom = intra.max(inter);
            if denom == 0.0 {
                0.0
            } else {
                (inter - intra) / denom
            }
        })
        .collect();
    let sc = per_sample_s.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteReport { sc, per_sample_s, n })
}

/// Top two principal directions of a feature cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca2 {
    pub mean: Array1<f64>,
    /// `[2, d]`, unit rows.
    pub components: Array2<f64>,
    /// Variances along the two components, descending.
    pub eigenvalues: [f64; 2],
    pub total_variance: f64,
}

const POWER_ITERS: usize = 1000;

impl Pca2 {
    /// Power iteration with deflation on the sample covariance (1/N),
    /// applied implicitly through the centered data.
    pub fn fit(features: &Array2<f64>) -> Result<Self> {
        let (n, d) = features.dim();
        if n < 3 {
            return Err(Error::InsufficientData(format!("PCA needs at least 3 samples, got {n}")));
        }
        let mean = features.mean_axis(Axis(0)).expect("non-empty");
        let x = features - &mean;
        let total_variance = x.mapv(|v| v * v).sum() / n as f64;
        if !(total_variance > 0.0) {
            return Err(Error::DegenerateData("features have zero total variance".into()));
        }
        let cov_mul = |v: &Array1<f64>| x.t().dot(&x.dot(v)) / n as f64;
        let mut rng = substream(0x9ca, 0);
        let mut components = Array2::zeros((2, d));
        let mut eigenvalues = [0.0; 2];
        for c in 0..2 {
            let mut v: Array1<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut lambda = 0.0;
            for _ in 0..POWER_ITERS {
                for p in 0..c {
                    let u = components.row(p);
                    let proj = u.dot(&v);
                    v.scaled_add(-proj, &u);
                }
                let norm = v.dot(&v).sqrt();
                if norm == 0.0 {
                    break;
                }
                v /= norm;
                let w = cov_mul(&v);
                lambda = v.dot(&w);
                v = w;
            }
            for p in 0..c {
                let u = components.row(p);
                let proj = u.dot(&v);
                v.scaled_add(-proj, &u);
            }
            let norm = v.dot(&v).sqrt();
            if norm > 0.0 {
                v /= norm;
                let pivot = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
                if pivot < 0.0 {
                    v.mapv_inplace(|e| -e);
                }
            }
            components.row_mut(c).assign(&v);
            eigenvalues[c] = lambda.max(0.0);
        }
        Ok(Pca2 { mean, components, eigenvalues, total_variance })
    }

    pub fn project(&self, features: &Array2<f64>) -> Array2<f64> {
        (features - &self.mean).dot(&self.components.t())
    }
}

/// Centered coordinates along the top two principal directions.
pub fn pca_project(features: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(Pca2::fit(features)?.project(features))
}
