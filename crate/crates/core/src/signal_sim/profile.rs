use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::substream;

/// Hardware fingerprint of one transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterProfile {
    pub emitter_id: u64,
    /// Linear Q/I gain ratio, 1.0 when balanced.
    pub iq_gain_imbalance: f64,
    /// Quadrature skew in radians.
    pub iq_phase_imbalance: f64,
    pub cfo_hz: f64,
    /// Standard deviation of the per-sample phase random walk, radians.
    pub phase_noise_std: f64,
    pub pa_coeff3: f64,
    pub dc_offset: Complex64,
}

impl EmitterProfile {
    pub fn ideal(emitter_id: u64) -> Self {
        EmitterProfile {
            emitter_id,
            iq_gain_imbalance: 1.0,
            iq_phase_imbalance: 0.0,
            cfo_hz: 0.0,
            phase_noise_std: 0.0,
            pa_coeff3: 0.0,
            dc_offset: Complex64::new(0.0, 0.0),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.iq_gain_imbalance > 0.0 && self.pa_coeff3.abs() < 1.0 && self.phase_noise_std >= 0.0
    }
}

/// Impairment magnitudes reached at severity 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentLimits {
    pub gain_dev: f64,
    pub phase_rad: f64,
    pub cfo_hz: f64,
    pub phase_noise_std: f64,
    pub pa_coeff3: f64,
    pub dc: f64,
}

impl Default for ImpairmentLimits {
    fn default() -> Self {
        ImpairmentLimits {
            gain_dev: 0.25,
            phase_rad: 0.25,
            cfo_hz: 20e3,
            phase_noise_std: 0.02,
            pa_coeff3: 0.3,
            dc: 0.1,
        }
    }
}

/// Draws a profile whose impairments are `severity` times a seed-determined
/// unit draw, so magnitudes are linear in severity and zero at severity 0.
pub fn make_emitter_profile(seed: u64, severity: f64) -> EmitterProfile {
    make_emitter_profile_with(seed, severity, &ImpairmentLimits::default())
}

pub fn make_emitter_profile_with(seed: u64, severity: f64, limits: &ImpairmentLimits) -> EmitterProfile {
    assert!((0.0..=1.0).contains(&severity), "severity must lie in [0, 1], got {severity}");
    let mut rng = substream(seed, 0x5e1);
    let mut sym = || rng.random_range(-1.0..1.0);
    let gain = sym();
    let phase = sym();
    let cfo = sym();
    let pa = sym();
    let dc_re = sym();
    let dc_im = sym();
    let pn: f64 = rng.random_range(0.0..1.0);
    let s = severity;
    EmitterProfile {
        emitter_id: seed,
        iq_gain_imbalance: 1.0 + s * limits.gain_dev * gain,
        iq_phase_imbalance: s * limits.phase_rad * phase,
        cfo_hz: s * limits.cfo_hz * cfo,
        phase_noise_std: s * limits.phase_noise_std * pn,
        pa_coeff3: s * limits.pa_coeff3 * pa,
        dc_offset: Complex64::new(s * limits.dc * dc_re, s * limits.dc * dc_im),
    }
}
