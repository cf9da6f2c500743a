use serde::{Deserialize, Serialize};

/// Summary of per-trial accuracies in the form of a box plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub trials: usize,
    pub mean: f64,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub min: f64,
    pub max: f64,
    pub accuracies: Vec<f64>,
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (`h = (n - 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl MonteCarloStats {
    /// Panics on an empty list.
    pub fn from_accuracies(accuracies: Vec<f64>) -> Self {
        let mut sorted = accuracies.clone();
        sorted.sort_by(f64::total_cmp);
        MonteCarloStats {
            trials: accuracies.len(),
            mean: accuracies.iter().sum::<f64>() / accuracies.len() as f64,
            median: quantile_sorted(&sorted, 0.5),
            lower_quartile: quantile_sorted(&sorted, 0.25),
            upper_quartile: quantile_sorted(&sorted, 0.75),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            accuracies,
        }
    }
}
