//! Hand-crafted baseline: moments of the instantaneous amplitude, phase
//! and frequency of a burst.

use ndarray::Array2;
use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};
use crate::fewshot::FeatureExtractor;
use crate::signal_sim::ComplexSignal;

pub const FEATURE_NAMES: [&str; 12] = [
    "amp_mean",
    "amp_var",
    "amp_skew",
    "amp_kurt",
    "phase_mean",
    "phase_var",
    "phase_skew",
    "phase_kurt",
    "freq_mean",
    "freq_var",
    "freq_skew",
    "freq_kurt",
];

/// Mean, variance, skewness and (non-excess) kurtosis of amplitude,
/// unwrapped phase and frequency, in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstFeatureVector {
    pub values: [f64; 12],
    /// Components whose variance vanished; their skewness and kurtosis are
    /// reported as 0.
    pub degenerate: [bool; 3],
}

/// Population moments `[mean, var, skew, kurt]` and a degeneracy flag.
pub fn moments(x: &[f64]) -> ([f64; 4], bool) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 1e-12 * (mean * mean).max(1.0) {
        return ([mean, m2, 0.0, 0.0], true);
    }
    ([mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2)], false)
}

fn widen(v: Complex32) -> Complex64 {
    Complex64::new(v.re as f64, v.im as f64)
}

/// Phase increments wrapped to `(-pi, pi]`.
pub fn phase_increments(sig: &ComplexSignal) -> Vec<f64> {
    sig.samples
        .windows(2)
        .map(|w| {
            let a = widen(w[0]);
            let b = widen(w[1]);
            let d = (b * a.conj()).arg();
            if d <= -std::f64::consts::PI {
                d + 2.0 * std::f64::consts::PI
            } else {
                d
            }
        })
        .collect()
}

pub fn instantaneous_features(sig: &ComplexSignal) -> Result<InstFeatureVector> {
    if sig.len() < 4 {
        return Err(Error::InsufficientData(format!("instantaneous features need >= 4 samples, got {}", sig.len())));
    }
    let amp: Vec<f64> = sig.samples.iter().map(|&v| widen(v).norm()).collect();
    let freq = phase_increments(sig);
    let mut phase = Vec::with_capacity(sig.len());
    phase.push(widen(sig.samples[0]).arg());
    for d in &freq {
        phase.push(phase[phase.len() - 1] + d);
    }
    let mut values = [0.0; 12];
    let mut degenerate = [false; 3];
    for (k, comp) in [&amp, &phase, &freq].into_iter().enumerate() {
        let (m, deg) = moments(comp);
        values[4 * k..4 * k + 4].copy_from_slice(&m);
        degenerate[k] = deg;
    }
    Ok(InstFeatureVector { values, degenerate })
}

/// [`FeatureExtractor`] producing the 12 baseline features.
#[derive(Debug, Clone, Copy, Default)]
pub struct InstFeatureExtractor;

impl FeatureExtractor for InstFeatureExtractor {
    fn feature_dim(&self) -> usize {
        12
    }

    fn extract(&self, signals: &[ComplexSignal]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((signals.len(), 12));
        for (mut row, s) in out.outer_iter_mut().zip(signals) {
            row.assign(&ndarray::ArrayView1::from(&instantaneous_features(s)?.values));
        }
        Ok(out)
    }
}
