//! Complex 1-D convolution (cross-correlation orientation, stride 1).
//!
//! The complex product is expanded into four real matrix products over
//! an im2col patch matrix:
//! `Re = Re(P)Re(W) - Im(P)Im(W)`, `Im = Re(P)Im(W) + Im(P)Re(W)`.

use ndarray::{linalg::general_mat_mul, s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::CTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    #[default]
    Same,
    Valid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    /// `[n_ne, n_in, kernel]`
    pub kernel_re: Array3<f64>,
    pub kernel_im: Array3<f64>,
    pub bias_re: Array1<f64>,
    pub bias_im: Array1<f64>,
    pub padding: Padding,
}

impl ConvLayerParams {
    pub fn zeros(n_ne: usize, n_in: usize, kernel: usize, padding: Padding) -> Self {
        assert!(n_ne >= 1 && n_in >= 1 && kernel >= 1, "conv dimensions must be >= 1");
        ConvLayerParams {
            kernel_re: Array3::zeros((n_ne, n_in, kernel)),
            kernel_im: Array3::zeros((n_ne, n_in, kernel)),
            bias_re: Array1::zeros(n_ne),
            bias_im: Array1::zeros(n_ne),
            padding,
        }
    }

    /// Independent Gaussian real and imaginary parts with
    /// std `1/sqrt(2 * n_in * kernel)`; zero biases.
    pub fn init<R: Rng + ?Sized>(n_ne: usize, n_in: usize, kernel: usize, padding: Padding, rng: &mut R) -> Self {
        let mut p = Self::zeros(n_ne, n_in, kernel, padding);
        let std = 1.0 / ((2 * n_in * kernel) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        p.kernel_re.mapv_inplace(|_| normal.sample(rng));
        p.kernel_im.mapv_inplace(|_| normal.sample(rng));
        p
    }

    pub fn n_ne(&self) -> usize {
        self.kernel_re.dim().0
    }

    pub fn n_in(&self) -> usize {
        self.kernel_re.dim().1
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_re.dim().2
    }

    fn pad_left(&self) -> usize {
        match self.padding {
            Padding::Same => (self.kernel_size() - 1) / 2,
            Padding::Valid => 0,
        }
    }

    pub fn out_len(&self, in_len: usize) -> Result<usize> {
        match self.padding {
            Padding::Same => Ok(in_len),
            Padding::Valid if in_len >= self.kernel_size() => Ok(in_len - self.kernel_size() + 1),
            Padding::Valid => Err(Error::ShapeMismatch(format!(
                "valid convolution needs length >= {}, got {in_len}",
                self.kernel_size()
            ))),
        }
    }

    /// Kernel reshaped to `[kernel * n_in, n_ne]`, row `k * n_in + n`.
    fn weight_matrices(&self) -> (Array2<f64>, Array2<f64>) {
        let (n_ne, n_in, k) = self.kernel_re.dim();
        let re = Array2::from_shape_fn((k * n_in, n_ne), |(r, m)| self.kernel_re[[m, r % n_in, r / n_in]]);
        let im = Array2::from_shape_fn((k * n_in, n_ne), |(r, m)| self.kernel_im[[m, r % n_in, r / n_in]]);
        (re, im)
    }
}

/// Receives the number of real multiply-accumulates a kernel performs.
pub trait MacCounter {
    fn add(&mut self, macs: u64);
}

impl MacCounter for () {
    #[inline]
    fn add(&mut self, _macs: u64) {}
}

impl MacCounter for u64 {
    #[inline]
    fn add(&mut self, macs: u64) {
        *self += macs;
    }
}

fn gemm<C: MacCounter>(alpha: f64, a: ArrayView2<f64>, b: ArrayView2<f64>, beta: f64, c: &mut Array2<f64>, n: &mut C) {
    n.add((a.nrows() * a.ncols() * b.ncols()) as u64);
    general_mat_mul(alpha, &a, &b, beta, c);
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    patches_re: Array2<f64>,
    patches_im: Array2<f64>,
    batch: usize,
    in_len: usize,
    out_len: usize,
}

fn im2col(input: &CTensor, p: &ConvLayerParams, out_len: usize) -> (Array2<f64>, Array2<f64>) {
    let (b_n, len, n_in, k_n) = (input.batch(), input.len(), p.n_in(), p.kernel_size());
    let pad = p.pad_left() as isize;
    let mut pr = Array2::zeros((b_n * out_len, k_n * n_in));
    let mut pi = Array2::zeros((b_n * out_len, k_n * n_in));
    for b in 0..b_n {
        for t in 0..out_len {
            let row = b * out_len + t;
            for k in 0..k_n {
                let src = t as isize + k as isize - pad;
                if src < 0 || src >= len as isize {
                    continue;
                }
                let src_row = b * len + src as usize;
                pr.slice_mut(s![row, k * n_in..(k + 1) * n_in]).assign(&input.re.row(src_row));
                pi.slice_mut(s![row, k * n_in..(k + 1) * n_in]).assign(&input.im.row(src_row));
            }
        }
    }
    (pr, pi)
}

pub fn cvconv1d_forward(input: &CTensor, params: &ConvLayerParams) -> Result<CTensor> {
    Ok(cvconv1d_forward_counted(input, params, &mut ())?.0)
}

/// Forward pass that also returns the backward cache and reports
/// `4 * kernel * out_len * n_in * n_ne` real MACs per sample to `counter`.
pub fn cvconv1d_forward_counted<C: MacCounter>(
    input: &CTensor,
    params: &ConvLayerParams,
    counter: &mut C,
) -> Result<(CTensor, ConvCache)> {
    if input.channels() != params.n_in() {
        return Err(Error::ShapeMismatch(format!(
            "conv expects {} input channels, got {}",
            params.n_in(),
            input.channels()
        )));
    }
    let out_len = params.out_len(input.len())?;
    let (pr, pi) = im2col(input, params, out_len);
    let (wr, wi) = params.weight_matrices();
    let rows = input.batch() * out_len;
    let mut out_re = Array2::zeros((rows, params.n_ne()));
    let mut out_im = Array2::zeros((rows, params.n_ne()));
    gemm(1.0, pr.view(), wr.view(), 0.0, &mut out_re, counter);
    gemm(-1.0, pi.view(), wi.view(), 1.0, &mut out_re, counter);
    gemm(1.0, pr.view(), wi.view(), 0.0, &mut out_im, counter);
    gemm(1.0, pi.view(), wr.view(), 1.0, &mut out_im, counter);
    out_re += &params.bias_re;
    out_im += &params.bias_im;
    let out = CTensor::from_planes(input.batch(), out_len, out_re, out_im)?;
    let cache = ConvCache { patches_re: pr, patches_im: pi, batch: input.batch(), in_len: input.len(), out_len };
    Ok((out, cache))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub kernel_re: Array3<f64>,
    pub kernel_im: Array3<f64>,
    pub bias_re: Array1<f64>,
    pub bias_im: Array1<f64>,
}

pub fn cvconv1d_backward(
    params: &ConvLayerParams,
    grad_out: &CTensor,
    cache: &ConvCache,
) -> Result<(CTensor, ConvGrads)> {
    if grad_out.batch() != cache.batch || grad_out.len() != cache.out_len || grad_out.channels() != params.n_ne() {
        return Err(Error::ShapeMismatch("conv upstream gradient does not match cached forward".into()));
    }
    let (n_ne, n_in, k_n) = params.kernel_re.dim();
    let (gr, gi) = (&grad_out.re, &grad_out.im);
    let (pr, pi) = (&cache.patches_re, &cache.patches_im);
    let mut c = ();

    let mut dwr = Array2::zeros((k_n * n_in, n_ne));
    let mut dwi = Array2::zeros((k_n * n_in, n_ne));
    gemm(1.0, pr.t(), gr.view(), 0.0, &mut dwr, &mut c);
    gemm(1.0, pi.t(), gi.view(), 1.0, &mut dwr, &mut c);
    gemm(1.0, pr.t(), gi.view(), 0.0, &mut dwi, &mut c);
    gemm(-1.0, pi.t(), gr.view(), 1.0, &mut dwi, &mut c);

    let (wr, wi) = params.weight_matrices();
    let mut dpr = Array2::zeros(pr.dim());
    let mut dpi = Array2::zeros(pi.dim());
    gemm(1.0, gr.view(), wr.t(), 0.0, &mut dpr, &mut c);
    gemm(1.0, gi.view(), wi.t(), 1.0, &mut dpr, &mut c);
    gemm(1.0, gi.view(), wr.t(), 0.0, &mut dpi, &mut c);
    gemm(-1.0, gr.view(), wi.t(), 1.0, &mut dpi, &mut c);

    let pad = params.pad_left() as isize;
    let mut grad_in = CTensor::zeros(cache.batch, cache.in_len, n_in);
    for b in 0..cache.batch {
        for t in 0..cache.out_len {
            let row = b * cache.out_len + t;
            for k in 0..k_n {
                let src = t as isize + k as isize - pad;
                if src < 0 || src >= cache.in_len as isize {
                    continue;
                }
                let dst = b * cache.in_len + src as usize;
                let cols = s![row, k * n_in..(k + 1) * n_in];
                let mut re_row = grad_in.re.row_mut(dst);
                re_row += &dpr.slice(cols);
                let mut im_row = grad_in.im.row_mut(dst);
                im_row += &dpi.slice(cols);
            }
        }
    }

    let kernel_re = Array3::from_shape_fn((n_ne, n_in, k_n), |(m, n, k)| dwr[[k * n_in + n, m]]);
    let kernel_im = Array3::from_shape_fn((n_ne, n_in, k_n), |(m, n, k)| dwi[[k * n_in + n, m]]);
    let grads = ConvGrads {
        kernel_re,
        kernel_im,
        bias_re: gr.sum_axis(Axis(0)),
        bias_im: gi.sum_axis(Axis(0)),
    };
    Ok((grad_in, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use num_complex::Complex64;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Direct complex multiply-accumulate, written independently of the
    /// four-real-product route.
    fn direct(input: &CTensor, p: &ConvLayerParams) -> Vec<Complex64> {
        let out_len = p.out_len(input.len()).unwrap();
        let pad = p.pad_left() as isize;
        let mut out = Vec::new();
        for b in 0..input.batch() {
            for t in 0..out_len {
                for m in 0..p.n_ne() {
                    let mut acc = c(p.bias_re[m], p.bias_im[m]);
                    for n in 0..p.n_in() {
                        for k in 0..p.kernel_size() {
                            let src = t as isize + k as isize - pad;
                            if src < 0 || src >= input.len() as isize {
                                continue;
                            }
                            let w = c(p.kernel_re[[m, n, k]], p.kernel_im[[m, n, k]]);
                            acc += w * input.get(b, src as usize, n);
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    fn random_tensor(batch: usize, len: usize, ch: usize, seed: u64) -> CTensor {
        let mut rng = substream(seed, 0);
        let mut t = CTensor::zeros(batch, len, ch);
        t.re.mapv_inplace(|_| rng.sample(StandardNormal));
        t.im.mapv_inplace(|_| rng.sample(StandardNormal));
        t
    }

    #[test]
    fn identity_kernel() {
        let input = CTensor::from_complex(1, 1, &[c(1.0, 0.0)]).unwrap();
        let mut p = ConvLayerParams::zeros(1, 1, 1, Padding::Valid);
        p.kernel_re[[0, 0, 0]] = 1.0;
        let out = cvconv1d_forward(&input, &p).unwrap();
        assert_eq!(out.get(0, 0, 0), c(1.0, 0.0));
    }

    #[test]
    fn hand_example() {
        let input = CTensor::from_complex(2, 1, &[c(1.0, 1.0), c(2.0, 0.0)]).unwrap();
        let mut p = ConvLayerParams::zeros(1, 1, 2, Padding::Valid);
        p.kernel_re[[0, 0, 0]] = 1.0;
        p.kernel_im[[0, 0, 1]] = 1.0;
        let out = cvconv1d_forward(&input, &p).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.get(0, 0, 0), c(1.0, 3.0));
    }

    #[test]
    fn four_real_products_match_direct() {
        for (seed, padding) in [(1, Padding::Same), (2, Padding::Valid), (3, Padding::Same)] {
            let input = random_tensor(2, 11, 3, seed);
            let mut rng = substream(seed, 1);
            let mut p = ConvLayerParams::init(4, 3, 3, padding, &mut rng);
            p.bias_re.mapv_inplace(|_| rng.sample(StandardNormal));
            p.bias_im.mapv_inplace(|_| rng.sample(StandardNormal));
            let out = cvconv1d_forward(&input, &p).unwrap();
            let expected = direct(&input, &p);
            let mut i = 0;
            for b in 0..out.batch() {
                for t in 0..out.len() {
                    for m in 0..out.channels() {
                        assert!((out.get(b, t, m) - expected[i]).norm() < 1e-12);
                        i += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn mac_count_matches_cost_model() {
        for &(len, n_in, n_ne, k, padding) in
            &[(16, 1, 4, 3, Padding::Same), (16, 4, 4, 3, Padding::Valid), (9, 2, 5, 5, Padding::Valid), (7, 3, 2, 1, Padding::Same)]
        {
            let input = random_tensor(1, len, n_in, 4);
            let p = ConvLayerParams::zeros(n_ne, n_in, k, padding);
            let mut macs = 0u64;
            let (out, _) = cvconv1d_forward_counted(&input, &p, &mut macs).unwrap();
            assert_eq!(macs, (4 * k * out.len() * n_in * n_ne) as u64);
        }
    }

    #[test]
    fn channel_mismatch() {
        let input = random_tensor(1, 8, 2, 5);
        let p = ConvLayerParams::zeros(3, 1, 3, Padding::Same);
        assert!(matches!(cvconv1d_forward(&input, &p), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn valid_too_short() {
        let input = random_tensor(1, 2, 1, 5);
        let p = ConvLayerParams::zeros(1, 1, 3, Padding::Valid);
        assert!(cvconv1d_forward(&input, &p).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let input = random_tensor(2, 8, 2, 6);
        let p = ConvLayerParams::init(3, 2, 3, Padding::Same, &mut substream(6, 1));
        let (out, cache) = cvconv1d_forward_counted(&input, &p, &mut ()).unwrap();
        let zero = CTensor::zeros(out.batch(), out.len(), out.channels());
        let (gin, g) = cvconv1d_backward(&p, &zero, &cache).unwrap();
        assert!(gin.re.iter().chain(gin.im.iter()).all(|&v| v == 0.0));
        assert!(g.kernel_re.iter().chain(g.kernel_im.iter()).all(|&v| v == 0.0));
    }
}
