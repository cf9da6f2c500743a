use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Moves each class center present in the batch toward its samples:
/// `c += alpha * sum(f - c) / (1 + n)`. Absent classes are untouched.
pub fn update_centers(centers: &mut Array2<f64>, features: &Array2<f64>, labels: &[usize], alpha: f64) -> Result<()> {
    if labels.len() != features.nrows() {
        return Err(Error::LengthMismatch { left: features.nrows(), right: labels.len() });
    }
    if centers.ncols() != features.ncols() {
        return Err(Error::ShapeMismatch(format!("center dim {} != feature dim {}", centers.ncols(), features.ncols())));
    }
    let classes = centers.nrows();
    let mut sums = vec![None::<Array1<f64>>; classes];
    let mut counts = vec![0usize; classes];
    for (f, &y) in features.outer_iter().zip(labels) {
        if y >= classes {
            return Err(Error::LabelOutOfRange { label: y, classes });
        }
        let d = &f - &centers.row(y);
        match sums[y].as_mut() {
            Some(s) => *s += &d,
            None => sums[y] = Some(d),
        }
        counts[y] += 1;
    }
    for (y, sum) in sums.into_iter().enumerate() {
        if let Some(sum) = sum {
            let delta = sum / (1 + counts[y]) as f64;
            centers.row_mut(y).scaled_add(alpha, &delta);
        }
    }
    Ok(())
}
