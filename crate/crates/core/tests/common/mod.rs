#![allow(dead_code, clippy::needless_range_loop)]

pub mod gradcheck;

use fssei::complex_nn::CTensor;
use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|)`, or 0 when both vanish.
pub fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    assert_eq!(a.len(), n.len());
    let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(n.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// At most `max` distinct indices below `len`, in ascending order.
pub fn pick<R: Rng>(len: usize, max: usize, rng: &mut R) -> Vec<usize> {
    if len <= max {
        return (0..len).collect();
    }
    let mut v = sample(rng, len, max).into_vec();
    v.sort_unstable();
    v
}

/// Central difference of `loss` at coordinate `i`, or `None` where the
/// function is not smooth at the `FD_STEP` scale (a ReLU kink or a pooling
/// switch lies inside the stencil), detected by disagreement between the
/// `h` and `h/2` estimates.
pub fn smooth_diff<T>(state: &mut T, get: &impl Fn(&mut T) -> &mut [f64], i: usize, loss: &impl Fn(&T) -> f64) -> Option<f64> {
    let orig = get(state)[i];
    let mut at = |x: f64| {
        get(state)[i] = x;
        loss(state)
    };
    let d1 = (at(orig + FD_STEP) - at(orig - FD_STEP)) / (2.0 * FD_STEP);
    let d2 = (at(orig + FD_STEP / 2.0) - at(orig - FD_STEP / 2.0)) / FD_STEP;
    get(state)[i] = orig;
    ((d1 - d2).abs() <= 1e-7 + 1e-5 * d1.abs()).then_some(d1)
}

/// Central differences at the smooth coordinates among `idx`; returns the
/// kept indices and their estimates.
pub fn central_diff<T>(
    state: &mut T,
    get: impl Fn(&mut T) -> &mut [f64],
    idx: &[usize],
    loss: impl Fn(&T) -> f64,
) -> (Vec<usize>, Vec<f64>) {
    idx.iter().filter_map(|&i| smooth_diff(state, &get, i, &loss).map(|d| (i, d))).unzip()
}

pub fn gather(values: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| values[i]).collect()
}

pub fn gaussian<R: Rng>(rng: &mut R, shape: (usize, usize), scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

pub fn random_tensor<R: Rng>(rng: &mut R, batch: usize, len: usize, channels: usize) -> CTensor {
    let re = gaussian(rng, (batch * len, channels), 1.0);
    let im = gaussian(rng, (batch * len, channels), 1.0);
    CTensor::from_planes(batch, len, re, im).unwrap()
}

/// Sum of `w .* y` over both planes: a generic scalar read-out whose
/// gradient with respect to `y` is `w`.
pub fn readout(y: &CTensor, w: &CTensor) -> f64 {
    (&y.re * &w.re).sum() + (&y.im * &w.im).sum()
}

/// Independent silhouette: full distance matrix, then per-sample averages
/// and minima.
pub fn brute_force_silhouette(x: &Array2<f64>, labels: &[usize]) -> Vec<f64> {
    let n = x.nrows();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let d = &x.row(i) - &x.row(j);
            dist[i][j] = d.dot(&d).sqrt();
        }
    }
    (0..n)
        .map(|i| {
            let same: Vec<f64> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).map(|j| dist[i][j]).collect();
            let other: Vec<f64> = (0..n).filter(|&j| labels[j] != labels[i]).map(|j| dist[i][j]).collect();
            let a = same.iter().sum::<f64>() / same.len() as f64;
            let b = other.iter().cloned().fold(f64::INFINITY, f64::min);
            if a == 0.0 && b == 0.0 {
                0.0
            } else {
                (b - a) / a.max(b)
            }
        })
        .collect()
}

/// Random labelled point set: `n` points in `d` dimensions, `classes`
/// classes with at least two members each.
pub fn random_labelled<R: Rng>(rng: &mut R, n: usize, d: usize, classes: usize) -> (Array2<f64>, Vec<usize>) {
    let mut labels: Vec<usize> = (0..n).map(|i| if i < 2 * classes { i / 2 } else { rng.random_range(0..classes) }).collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), rng);
    let offsets = gaussian(rng, (classes, d), 2.0);
    let mut x = gaussian(rng, (n, d), 1.0);
    for (mut row, &l) in x.outer_iter_mut().zip(&labels) {
        row += &offsets.row(l);
    }
    (x, labels)
}

/// Quartile by sorting and integer position arithmetic: position
/// `(n - 1) k / 4` split into whole and quarter parts.
pub fn sorted_quartile(values: &[f64], k: usize) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let num = (s.len() - 1) * k;
    let (lo, rem) = (num / 4, num % 4);
    if rem == 0 {
        s[lo]
    } else {
        s[lo] + (rem as f64 / 4.0) * (s[lo + 1] - s[lo])
    }
}
