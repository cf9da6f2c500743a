use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal_sim::ComplexSignal;

/// Batch of complex sequences stored as separate real and imaginary planes.
///
/// Each plane is `[batch * len, channels]`; row `b * len + t` holds time
/// step `t` of sample `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct CTensor {
    batch: usize,
    len: usize,
    pub re: Array2<f64>,
    pub im: Array2<f64>,
}

impl CTensor {
    pub fn zeros(batch: usize, len: usize, channels: usize) -> Self {
        CTensor {
            batch,
            len,
            re: Array2::zeros((batch * len, channels)),
            im: Array2::zeros((batch * len, channels)),
        }
    }

    pub fn from_planes(batch: usize, len: usize, re: Array2<f64>, im: Array2<f64>) -> Result<Self> {
        if re.dim() != im.dim() || re.nrows() != batch * len {
            return Err(Error::ShapeMismatch(format!(
                "planes {:?}/{:?} do not match batch {batch} x len {len}",
                re.dim(),
                im.dim()
            )));
        }
        Ok(CTensor { batch, len, re: re.as_standard_layout().into_owned(), im: im.as_standard_layout().into_owned() })
    }

    /// Single-channel tensor from equal-length signals.
    pub fn from_signals(signals: &[&ComplexSignal]) -> Result<Self> {
        let len = signals.first().map_or(0, |s| s.len());
        let mut t = CTensor::zeros(signals.len(), len, 1);
        for (b, s) in signals.iter().enumerate() {
            if s.len() != len {
                return Err(Error::ShapeMismatch(format!("signal {b} has length {} not {len}", s.len())));
            }
            for (i, v) in s.samples.iter().enumerate() {
                t.re[[b * len + i, 0]] = v.re as f64;
                t.im[[b * len + i, 0]] = v.im as f64;
            }
        }
        Ok(t)
    }

    /// Single-sample tensor `[len, channels]` from complex values laid out
    /// row-major by time step.
    pub fn from_complex(len: usize, channels: usize, values: &[Complex64]) -> Result<Self> {
        if values.len() != len * channels {
            return Err(Error::ShapeMismatch(format!("{} values for {len}x{channels}", values.len())));
        }
        let re = Array2::from_shape_fn((len, channels), |(t, c)| values[t * channels + c].re);
        let im = Array2::from_shape_fn((len, channels), |(t, c)| values[t * channels + c].im);
        Ok(CTensor { batch: 1, len, re, im })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0 || self.batch == 0
    }

    pub fn channels(&self) -> usize {
        self.re.ncols()
    }

    pub fn rows(&self) -> usize {
        self.re.nrows()
    }

    pub fn get(&self, b: usize, t: usize, c: usize) -> Complex64 {
        let r = b * self.len + t;
        Complex64::new(self.re[[r, c]], self.im[[r, c]])
    }

    pub fn set(&mut self, b: usize, t: usize, c: usize, v: Complex64) {
        let r = b * self.len + t;
        self.re[[r, c]] = v.re;
        self.im[[r, c]] = v.im;
    }

    pub fn scale(&self, s: f64) -> CTensor {
        CTensor { batch: self.batch, len: self.len, re: &self.re * s, im: &self.im * s }
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|v| v.is_finite())
    }

    pub(crate) fn same_shape(&self, other: &CTensor) -> bool {
        self.batch == other.batch && self.len == other.len && self.re.dim() == other.re.dim()
    }
}
