use ndarray::Array2;

use super::tensor::CTensor;
use crate::error::{Error, Result};

/// Source row of each pooled element, `[out_rows, channels]`.
#[derive(Debug, Clone)]
pub struct PoolCache {
    argmax: Array2<usize>,
    batch: usize,
    in_len: usize,
}

/// Keeps, per window, the complex element of largest modulus (earliest on
/// ties). Trailing elements that do not fill a window are dropped.
pub fn magnitude_maxpool(input: &CTensor, window: usize) -> Result<(CTensor, PoolCache)> {
    if window == 0 || input.len() < window {
        return Err(Error::ShapeMismatch(format!("cannot pool length {} by {window}", input.len())));
    }
    let (batch, len, ch) = (input.batch(), input.len(), input.channels());
    let out_len = len / window;
    let mut out = CTensor::zeros(batch, out_len, ch);
    let mut argmax = Array2::zeros((batch * out_len, ch));
    for b in 0..batch {
        for t in 0..out_len {
            let dst = b * out_len + t;
            let first = b * len + t * window;
            for c in 0..ch {
                let mut best = first;
                let mut best_mag = input.re[[first, c]].powi(2) + input.im[[first, c]].powi(2);
                for src in first + 1..first + window {
                    let mag = input.re[[src, c]].powi(2) + input.im[[src, c]].powi(2);
                    if mag > best_mag {
                        best = src;
                        best_mag = mag;
                    }
                }
                argmax[[dst, c]] = best;
                out.re[[dst, c]] = input.re[[best, c]];
                out.im[[dst, c]] = input.im[[best, c]];
            }
        }
    }
    Ok((out, PoolCache { argmax, batch, in_len: len }))
}

pub fn maxpool_backward(grad_out: &CTensor, cache: &PoolCache) -> Result<CTensor> {
    if grad_out.rows() != cache.argmax.nrows() || grad_out.channels() != cache.argmax.ncols() {
        return Err(Error::ShapeMismatch("pool upstream gradient does not match cached forward".into()));
    }
    let mut g = CTensor::zeros(cache.batch, cache.in_len, grad_out.channels());
    for ((r, c), &src) in cache.argmax.indexed_iter() {
        g.re[[src, c]] += grad_out.re[[r, c]];
        g.im[[src, c]] += grad_out.im[[r, c]];
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn larger_modulus_wins() {
        let x = CTensor::from_complex(2, 1, &[c(1.0, 0.0), c(0.0, 3.0)]).unwrap();
        let (y, _) = magnitude_maxpool(&x, 2).unwrap();
        assert_eq!(y.get(0, 0, 0), c(0.0, 3.0));
    }

    #[test]
    fn tie_keeps_earlier() {
        let x = CTensor::from_complex(2, 1, &[c(2.0, 0.0), c(0.0, 2.0)]).unwrap();
        let (y, _) = magnitude_maxpool(&x, 2).unwrap();
        assert_eq!(y.get(0, 0, 0), c(2.0, 0.0));
    }

    #[test]
    fn odd_length_floors() {
        let x = CTensor::from_complex(5, 1, &[c(1.0, 0.0); 5]).unwrap();
        let (y, _) = magnitude_maxpool(&x, 2).unwrap();
        assert_eq!(y.len(), 2);
    }

    #[test]
    fn gradient_goes_to_selected_element() {
        let x = CTensor::from_complex(2, 1, &[c(1.0, 0.0), c(0.0, 3.0)]).unwrap();
        let (_, cache) = magnitude_maxpool(&x, 2).unwrap();
        let up = CTensor::from_complex(1, 1, &[c(0.5, -2.0)]).unwrap();
        let g = maxpool_backward(&up, &cache).unwrap();
        assert_eq!(g.get(0, 0, 0), c(0.0, 0.0));
        assert_eq!(g.get(0, 1, 0), c(0.5, -2.0));
    }

    proptest! {
        #[test]
        fn positive_scaling_commutes(vals in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 8), s in 0.01f64..100.0) {
            let x = CTensor::from_complex(4, 2, &vals.iter().map(|&(a, b)| c(a, b)).collect::<Vec<_>>()).unwrap();
            let (y, cy) = magnitude_maxpool(&x, 2).unwrap();
            let (ys, cys) = magnitude_maxpool(&x.scale(s), 2).unwrap();
            prop_assert_eq!(&cy.argmax, &cys.argmax);
            for r in 0..y.rows() {
                for ch in 0..2 {
                    prop_assert!((ys.re[[r, ch]] - s * y.re[[r, ch]]).abs() <= 1e-12 * s.max(1.0) * 10.0);
                    prop_assert!((ys.im[[r, ch]] - s * y.im[[r, ch]]).abs() <= 1e-12 * s.max(1.0) * 10.0);
                }
            }
        }
    }
}
