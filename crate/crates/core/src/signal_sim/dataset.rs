use num_complex::Complex32;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::burst::{synthesize_burst, BurstConfig, PAYLOAD_BITS};
use super::profile::EmitterProfile;
use crate::error::{Error, Result};
use crate::rng::{digest_hex, substream};

/// One burst of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex32>,
    pub sample_rate_hz: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex32>, sample_rate_hz: f64) -> Self {
        ComplexSignal { samples, sample_rate_hz }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let p: f64 = self.samples.iter().map(|v| (v.re as f64).powi(2) + (v.im as f64).powi(2)).sum();
        (p / self.samples.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    Auxiliary,
    FewshotTrain,
    Test,
    /// Candidate emitters from which few-shot episodes are drawn.
    Pool,
}

impl DatasetRole {
    pub fn code(self) -> u8 {
        match self {
            DatasetRole::Auxiliary => 0,
            DatasetRole::FewshotTrain => 1,
            DatasetRole::Test => 2,
            DatasetRole::Pool => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => DatasetRole::Auxiliary,
            1 => DatasetRole::FewshotTrain,
            2 => DatasetRole::Test,
            3 => DatasetRole::Pool,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub signals: Vec<ComplexSignal>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub role: DatasetRole,
    pub provenance: String,
}

impl LabeledDataset {
    /// Validates labels, shared signal shape, and (for auxiliary data) that
    /// every class occurs.
    pub fn new(
        signals: Vec<ComplexSignal>,
        labels: Vec<usize>,
        class_count: usize,
        role: DatasetRole,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if signals.len() != labels.len() {
            return Err(Error::LengthMismatch { left: signals.len(), right: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelOutOfRange { label: bad, classes: class_count });
        }
        if let Some(first) = signals.first() {
            for (i, s) in signals.iter().enumerate() {
                if s.len() != first.len() || s.sample_rate_hz.to_bits() != first.sample_rate_hz.to_bits() {
                    return Err(Error::ShapeMismatch(format!(
                        "signal {i} has length {} at {} Hz, expected {} at {} Hz",
                        s.len(),
                        s.sample_rate_hz,
                        first.len(),
                        first.sample_rate_hz
                    )));
                }
            }
        }
        if role == DatasetRole::Auxiliary {
            let counts = class_counts(&labels, class_count);
            if let Some(missing) = counts.iter().position(|&c| c == 0) {
                return Err(Error::InsufficientClassData(format!("auxiliary class {missing} has no samples")));
            }
        }
        Ok(LabeledDataset { signals, labels, class_count, role, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn signal_len(&self) -> usize {
        self.signals.first().map_or(0, |s| s.len())
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.signals.first().map_or(0.0, |s| s.sample_rate_hz)
    }

    /// Sample indices grouped by class, each group in ascending order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    /// Copies the selected samples. Labels are kept as-is.
    pub fn subset(&self, indices: &[usize], role: DatasetRole) -> Result<Self> {
        let signals = indices.iter().map(|&i| self.signals[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(signals, labels, self.class_count, role, self.provenance.clone())
    }

    /// Per-class random split; `fraction` of each class (rounded, at least
    /// one sample when the class has two or more) goes to the first part.
    pub fn split_per_class<R: Rng + ?Sized>(&self, fraction: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let mut first = Vec::new();
        let mut second = Vec::new();
        for mut group in self.indices_by_class() {
            group.shuffle(rng);
            let mut k = (group.len() as f64 * fraction).round() as usize;
            if group.len() >= 2 {
                k = k.clamp(1, group.len() - 1);
            }
            first.extend_from_slice(&group[..k.min(group.len())]);
            second.extend_from_slice(&group[k.min(group.len())..]);
        }
        first.sort_unstable();
        second.sort_unstable();
        (first, second)
    }
}

pub(crate) fn class_counts(labels: &[usize], class_count: usize) -> Vec<usize> {
    let mut counts = vec![0usize; class_count];
    for &l in labels {
        if l < class_count {
            counts[l] += 1;
        }
    }
    counts
}

#[derive(Serialize)]
struct GenerationRecord<'a> {
    profiles: &'a [EmitterProfile],
    samples_per_class: usize,
    snr_db: f64,
    seed: u64,
    burst: &'a BurstConfig,
}

/// Generates `samples_per_class` bursts per profile; profile `i` gets label
/// `i`. Burst `j` of class `i` uses the substream `(seed, i * spc + j)`, so
/// generation order does not matter.
pub fn generate_dataset(
    profiles: &[EmitterProfile],
    samples_per_class: usize,
    snr_db: f64,
    seed: u64,
    burst: &BurstConfig,
    role: DatasetRole,
) -> Result<LabeledDataset> {
    if profiles.is_empty() {
        return Err(Error::InvalidConfig("at least one emitter profile is required".into()));
    }
    if samples_per_class == 0 {
        return Err(Error::InvalidConfig("samples_per_class must be >= 1".into()));
    }
    let total = profiles.len() * samples_per_class;
    let signals = (0..total)
        .into_par_iter()
        .map(|idx| {
            let class = idx / samples_per_class;
            let mut rng = substream(seed, idx as u64);
            let bits: Vec<bool> = (0..PAYLOAD_BITS).map(|_| rng.random()).collect();
            synthesize_burst(&profiles[class], &bits, snr_db, burst, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..total).map(|idx| idx / samples_per_class).collect();
    let record = GenerationRecord { profiles, samples_per_class, snr_db, seed, burst };
    let provenance = digest_hex(serde_json::to_string(&record)?.as_bytes());
    LabeledDataset::new(signals, labels, profiles.len(), role, provenance)
}
