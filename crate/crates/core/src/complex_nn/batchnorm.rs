//! Complex batch normalization.
//!
//! Each channel's `(Re, Im)` pairs are centered and whitened with the
//! inverse square root of their 2x2 covariance (plus `epsilon * I`), then
//! mapped by a learnable 2x2 `gamma` and 2-vector `beta`.

use ndarray::{Array1, Array2, Array3, Axis};

use super::tensor::CTensor;
use super::Mode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CvbnParams {
    /// `[channels, 2, 2]`, rows/cols ordered (Re, Im).
    pub gamma: Array3<f64>,
    /// `[channels, 2]`
    pub beta: Array2<f64>,
    pub running_mean: Array2<f64>,
    pub running_cov: Array3<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

impl CvbnParams {
    /// `gamma = I / sqrt(2)`, `beta = 0`, running stats `(0, I)`.
    pub fn new(channels: usize, epsilon: f64, momentum: f64) -> Self {
        let mut p = Self::identity(channels, epsilon, momentum);
        p.gamma.mapv_inplace(|v| v * std::f64::consts::FRAC_1_SQRT_2);
        p
    }

    /// Like [`CvbnParams::new`] but with `gamma = I`.
    pub fn identity(channels: usize, epsilon: f64, momentum: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        let eye = Array3::from_shape_fn((channels, 2, 2), |(_, i, j)| if i == j { 1.0 } else { 0.0 });
        CvbnParams {
            gamma: eye.clone(),
            beta: Array2::zeros((channels, 2)),
            running_mean: Array2::zeros((channels, 2)),
            running_cov: eye,
            epsilon,
            momentum,
        }
    }

    pub fn channels(&self) -> usize {
        self.beta.nrows()
    }
}

/// Closed-form inverse square root of the SPD matrix `[[a, b], [b, d]]`,
/// returned row-major.
pub fn inv_sqrt_2x2(a: f64, b: f64, d: f64) -> [f64; 4] {
    let s = (a * d - b * b).sqrt();
    let t = (a + d + 2.0 * s).sqrt();
    let k = 1.0 / (s * t);
    [k * (d + s), -k * b, -k * b, k * (a + s)]
}

/// Partial derivatives of `inv_sqrt_2x2` with respect to `a`, `b`, `d`,
/// each as a row-major 2x2.
fn inv_sqrt_2x2_partials(a: f64, b: f64, d: f64) -> [[f64; 4]; 3] {
    let s = (a * d - b * b).sqrt();
    let t = (a + d + 2.0 * s).sqrt();
    let k = 1.0 / (s * t);
    let mat = [d + s, -b, -b, a + s];
    let ds = [d / (2.0 * s), -b / s, a / (2.0 * s)];
    let dtr = [1.0, 0.0, 1.0];
    let mut out = [[0.0; 4]; 3];
    for x in 0..3 {
        let dt = (dtr[x] + 2.0 * ds[x]) / (2.0 * t);
        let dk = -k * (ds[x] / s + dt / t);
        let dmat = match x {
            0 => [ds[0], 0.0, 0.0, 1.0 + ds[0]],
            1 => [ds[1], -1.0, -1.0, ds[1]],
            _ => [1.0 + ds[2], 0.0, 0.0, ds[2]],
        };
        for e in 0..4 {
            out[x][e] = dk * mat[e] + k * dmat[e];
        }
    }
    out
}

/// Batch statistics (without epsilon) used to refresh running estimates.
#[derive(Debug, Clone)]
pub struct BnBatchStats {
    pub mean: Array2<f64>,
    pub cov: Array3<f64>,
}

#[derive(Debug, Clone)]
pub struct BnCache {
    mode: Mode,
    z_re: Array2<f64>,
    z_im: Array2<f64>,
    xhat_re: Array2<f64>,
    xhat_im: Array2<f64>,
    /// `(a, b, d)` of the covariance actually inverted, epsilon included.
    cov: Vec<[f64; 3]>,
    whiten: Vec<[f64; 4]>,
    batch: usize,
    len: usize,
}

impl BnCache {
    pub fn whitened(&self) -> (&Array2<f64>, &Array2<f64>) {
        (&self.xhat_re, &self.xhat_im)
    }
}

fn column(v: impl Fn(usize) -> f64, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, v)
}

pub fn cvbn_forward(input: &CTensor, params: &CvbnParams, mode: Mode) -> Result<(CTensor, BnCache, Option<BnBatchStats>)> {
    let ch = input.channels();
    if ch != params.channels() {
        return Err(Error::ShapeMismatch(format!("cvbn has {} channels, input has {ch}", params.channels())));
    }
    let n = input.rows();
    let eps = params.epsilon;
    let (mean_re, mean_im, cov, stats) = match mode {
        Mode::Train => {
            if n < 2 {
                return Err(Error::DegenerateBatch { population: n });
            }
            let mr = input.re.mean_axis(Axis(0)).expect("non-empty");
            let mi = input.im.mean_axis(Axis(0)).expect("non-empty");
            let zr = &input.re - &mr;
            let zi = &input.im - &mi;
            let nf = n as f64;
            let vrr = (&zr * &zr).sum_axis(Axis(0)) / nf;
            let vri = (&zr * &zi).sum_axis(Axis(0)) / nf;
            let vii = (&zi * &zi).sum_axis(Axis(0)) / nf;
            let cov: Vec<[f64; 3]> = (0..ch).map(|c| [vrr[c] + eps, vri[c], vii[c] + eps]).collect();
            let mut mean = Array2::zeros((ch, 2));
            let mut bcov = Array3::zeros((ch, 2, 2));
            for c in 0..ch {
                mean[[c, 0]] = mr[c];
                mean[[c, 1]] = mi[c];
                bcov[[c, 0, 0]] = vrr[c];
                bcov[[c, 0, 1]] = vri[c];
                bcov[[c, 1, 0]] = vri[c];
                bcov[[c, 1, 1]] = vii[c];
            }
            (mr, mi, cov, Some(BnBatchStats { mean, cov: bcov }))
        }
        Mode::Eval => {
            let rm = &params.running_mean;
            let rc = &params.running_cov;
            let cov = (0..ch).map(|c| [rc[[c, 0, 0]] + eps, rc[[c, 0, 1]], rc[[c, 1, 1]] + eps]).collect();
            (rm.column(0).to_owned(), rm.column(1).to_owned(), cov, None)
        }
    };
    let whiten: Vec<[f64; 4]> = cov.iter().map(|&[a, b, d]| inv_sqrt_2x2(a, b, d)).collect();
    let z_re = &input.re - &mean_re;
    let z_im = &input.im - &mean_im;
    let w = |e: usize| column(|c| whiten[c][e], ch);
    let xhat_re = &z_re * &w(0) + &z_im * &w(1);
    let xhat_im = &z_re * &w(2) + &z_im * &w(3);
    let g = |i: usize, j: usize| column(|c| params.gamma[[c, i, j]], ch);
    let y_re = &xhat_re * &g(0, 0) + &xhat_im * &g(0, 1) + params.beta.column(0);
    let y_im = &xhat_re * &g(1, 0) + &xhat_im * &g(1, 1) + params.beta.column(1);
    let out = CTensor::from_planes(input.batch(), input.len(), y_re, y_im)?;
    let cache = BnCache { mode, z_re, z_im, xhat_re, xhat_im, cov, whiten, batch: input.batch(), len: input.len() };
    Ok((out, cache, stats))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnGrads {
    pub gamma: Array3<f64>,
    pub beta: Array2<f64>,
}

pub fn cvbn_backward(params: &CvbnParams, grad_out: &CTensor, cache: &BnCache) -> Result<(CTensor, BnGrads)> {
    if grad_out.batch() != cache.batch || grad_out.len() != cache.len || grad_out.channels() != params.channels() {
        return Err(Error::ShapeMismatch("cvbn upstream gradient does not match cached forward".into()));
    }
    let ch = params.channels();
    let n = grad_out.rows() as f64;
    let (gr, gi) = (&grad_out.re, &grad_out.im);
    let sum = |a: &Array2<f64>| a.sum_axis(Axis(0));

    let mut d_gamma = Array3::zeros((ch, 2, 2));
    let mut d_beta = Array2::zeros((ch, 2));
    let terms = [
        sum(&(gr * &cache.xhat_re)),
        sum(&(gr * &cache.xhat_im)),
        sum(&(gi * &cache.xhat_re)),
        sum(&(gi * &cache.xhat_im)),
    ];
    let (sr, si) = (sum(gr), sum(gi));
    for c in 0..ch {
        d_gamma[[c, 0, 0]] = terms[0][c];
        d_gamma[[c, 0, 1]] = terms[1][c];
        d_gamma[[c, 1, 0]] = terms[2][c];
        d_gamma[[c, 1, 1]] = terms[3][c];
        d_beta[[c, 0]] = sr[c];
        d_beta[[c, 1]] = si[c];
    }

    // Gradient with respect to the whitened values: gamma^T g.
    let g = |i: usize, j: usize| column(|c| params.gamma[[c, i, j]], ch);
    let h_re = gr * &g(0, 0) + gi * &g(1, 0);
    let h_im = gr * &g(0, 1) + gi * &g(1, 1);
    let w = |e: usize| column(|c| cache.whiten[c][e], ch);
    let mut dz_re = &h_re * &w(0) + &h_im * &w(2);
    let mut dz_im = &h_re * &w(1) + &h_im * &w(3);

    if cache.mode == Mode::Train {
        let gw = [
            sum(&(&h_re * &cache.z_re)),
            sum(&(&h_re * &cache.z_im)),
            sum(&(&h_im * &cache.z_re)),
            sum(&(&h_im * &cache.z_im)),
        ];
        let mut ga = Array1::zeros(ch);
        let mut gb = Array1::zeros(ch);
        let mut gd = Array1::zeros(ch);
        for c in 0..ch {
            let [a, b, d] = cache.cov[c];
            let partials = inv_sqrt_2x2_partials(a, b, d);
            let dot = |p: &[f64; 4]| (0..4).map(|e| gw[e][c] * p[e]).sum::<f64>();
            ga[c] = dot(&partials[0]);
            gb[c] = dot(&partials[1]);
            gd[c] = dot(&partials[2]);
        }
        dz_re = dz_re + (&cache.z_re * &(&ga * 2.0) + &cache.z_im * &gb) / n;
        dz_im = dz_im + (&cache.z_im * &(&gd * 2.0) + &cache.z_re * &gb) / n;
        let mr = dz_re.mean_axis(Axis(0)).expect("non-empty");
        let mi = dz_im.mean_axis(Axis(0)).expect("non-empty");
        dz_re -= &mr;
        dz_im -= &mi;
    }
    let grad_in = CTensor::from_planes(cache.batch, cache.len, dz_re, dz_im)?;
    Ok((grad_in, BnGrads { gamma: d_gamma, beta: d_beta }))
}

/// Exponential moving average: `running = m * running + (1 - m) * batch`.
pub fn update_running_stats(params: &mut CvbnParams, stats: &BnBatchStats) {
    let m = params.momentum;
    params.running_mean = &params.running_mean * m + &stats.mean * (1.0 - m);
    params.running_cov = &params.running_cov * m + &stats.cov * (1.0 - m);
}
