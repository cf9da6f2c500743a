//! Synthetic ADS-B-like bursts with per-emitter hardware impairments.
//!
//! A burst is a four-pulse preamble followed by a 112-bit pulse-position
//! modulated data block. Each emitter applies, in this fixed order, IQ
//! imbalance, third-order PA nonlinearity, carrier frequency offset, phase
//! noise and a DC offset. AWGN is added at the requested SNR and the result
//! is normalized to unit RMS power. The channel is unit gain.
//!
//! The severity scale is an uncalibrated stand-in for real receiver
//! diversity; it only guarantees that impairment magnitudes grow with it.

mod burst;
mod dataset;
mod io;
mod profile;

pub use burst::{
    apply_impairments, ideal_waveform, synthesize_burst, synthesize_components, BurstComponents,
    BurstConfig, PAYLOAD_BITS,
};
pub use dataset::{generate_dataset, ComplexSignal, DatasetRole, LabeledDataset};
pub use io::{read_dataset, read_dataset_from, write_dataset, write_dataset_to, DATASET_MAGIC, DATASET_VERSION};
pub use profile::{make_emitter_profile, EmitterProfile, ImpairmentLimits};
