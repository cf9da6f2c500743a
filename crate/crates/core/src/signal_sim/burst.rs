use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::ComplexSignal;
use super::profile::EmitterProfile;
use crate::error::{Error, Result};

pub const PAYLOAD_BITS: usize = 112;

/// Framing of a synthesized burst. Times are in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurstConfig {
    pub sample_rate_hz: f64,
    /// Number of samples kept; the burst is truncated or zero-extended.
    pub length: usize,
    pub preamble_offsets_us: [f64; 4],
    pub pulse_us: f64,
    pub data_start_us: f64,
    pub bit_us: f64,
}

impl Default for BurstConfig {
    fn default() -> Self {
        // 4 samples/us puts the whole 120 us burst inside 512 samples.
        BurstConfig {
            sample_rate_hz: 4e6,
            length: 512,
            preamble_offsets_us: [0.0, 1.0, 3.5, 4.5],
            pulse_us: 0.5,
            data_start_us: 8.0,
            bit_us: 1.0,
        }
    }
}

impl BurstConfig {
    pub fn samples_per_us(&self) -> f64 {
        self.sample_rate_hz * 1e-6
    }

    fn check_rate(&self) -> Result<()> {
        let per_pulse = self.samples_per_us() * 0.5;
        if per_pulse < 2.0 {
            return Err(Error::SampleRateTooLow { samples_per_pulse: per_pulse });
        }
        Ok(())
    }
}

/// Clean transmitted envelope: preamble pulses then PPM data (a `1` bit
/// puts its pulse in the first half of the bit period).
pub fn ideal_waveform(payload_bits: &[bool], cfg: &BurstConfig) -> Result<Vec<Complex64>> {
    if payload_bits.len() != PAYLOAD_BITS {
        return Err(Error::PayloadLength { got: payload_bits.len() });
    }
    cfg.check_rate()?;
    let mut starts: Vec<f64> = cfg.preamble_offsets_us.to_vec();
    let half = cfg.bit_us / 2.0;
    for (i, &bit) in payload_bits.iter().enumerate() {
        let t0 = cfg.data_start_us + i as f64 * cfg.bit_us;
        starts.push(if bit { t0 } else { t0 + half });
    }
    let spu = cfg.samples_per_us();
    let mut out = vec![Complex64::new(0.0, 0.0); cfg.length];
    for start in starts {
        let first = (start * spu).round() as usize;
        let last = ((start + cfg.pulse_us) * spu).round() as usize;
        for s in out.iter_mut().take(last.min(cfg.length)).skip(first) {
            *s = Complex64::new(1.0, 0.0);
        }
    }
    Ok(out)
}

/// Applies the emitter impairments in place, in the documented order.
pub fn apply_impairments<R: Rng + ?Sized>(
    profile: &EmitterProfile,
    x: &mut [Complex64],
    sample_rate_hz: f64,
    rng: &mut R,
) {
    let (sin_p, cos_p) = profile.iq_phase_imbalance.sin_cos();
    let g = profile.iq_gain_imbalance;
    let omega = 2.0 * PI * profile.cfo_hz / sample_rate_hz;
    let mut theta = 0.0f64;
    for (n, v) in x.iter_mut().enumerate() {
        // IQ imbalance: the Q branch has gain g and a skew of phi.
        let q = g * (v.im * cos_p - v.re * sin_p);
        let mut y = Complex64::new(v.re, q);
        y += y * (profile.pa_coeff3 * y.norm_sqr());
        y *= Complex64::from_polar(1.0, omega * n as f64);
        if profile.phase_noise_std > 0.0 {
            let step: f64 = rng.sample(StandardNormal);
            theta += profile.phase_noise_std * step;
            y *= Complex64::from_polar(1.0, theta);
        }
        *v = y + profile.dc_offset;
    }
}

/// A burst before normalization: the impaired waveform and the additive
/// noise drawn for it, kept apart so SNR can be measured.
#[derive(Debug, Clone)]
pub struct BurstComponents {
    pub clean: Vec<Complex64>,
    pub noise: Vec<Complex64>,
}

pub fn synthesize_components<R: Rng + ?Sized>(
    profile: &EmitterProfile,
    payload_bits: &[bool],
    snr_db: f64,
    cfg: &BurstConfig,
    rng: &mut R,
) -> Result<BurstComponents> {
    let mut clean = ideal_waveform(payload_bits, cfg)?;
    apply_impairments(profile, &mut clean, cfg.sample_rate_hz, rng);
    let mut noise = vec![Complex64::new(0.0, 0.0); clean.len()];
    if snr_db.is_finite() {
        let p_sig = mean_power(&clean);
        let sigma = (p_sig / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
        for n in noise.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *n = Complex64::new(sigma * re, sigma * im);
        }
    }
    Ok(BurstComponents { clean, noise })
}

/// Full burst: impaired waveform plus AWGN, normalized to unit RMS.
pub fn synthesize_burst<R: Rng + ?Sized>(
    profile: &EmitterProfile,
    payload_bits: &[bool],
    snr_db: f64,
    cfg: &BurstConfig,
    rng: &mut R,
) -> Result<ComplexSignal> {
    let parts = synthesize_components(profile, payload_bits, snr_db, cfg, rng)?;
    let summed: Vec<Complex64> = parts.clean.iter().zip(&parts.noise).map(|(c, n)| c + n).collect();
    let rms = mean_power(&summed).sqrt();
    let scale = if rms > 0.0 { 1.0 / rms } else { 1.0 };
    let samples = summed
        .iter()
        .map(|v| Complex32::new((v.re * scale) as f32, (v.im * scale) as f32))
        .collect();
    Ok(ComplexSignal::new(samples, cfg.sample_rate_hz))
}

pub(crate) fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}
