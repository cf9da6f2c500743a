use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use fssei::fewshot::FewShotConfig;
use fssei::signal_sim::BurstConfig;
use fssei::trainer::TrainConfig;

use crate::CliError;

/// Reads a JSON config, reporting the path of the offending field.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Config(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))
}

pub fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    path.map_or_else(|| Ok(T::default()), load_json)
}

/// A contiguous range of emitter seeds and how many bursts each emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterGroup {
    pub first_seed: u64,
    pub emitters: usize,
    pub bursts_per_emitter: usize,
}

impl EmitterGroup {
    pub fn seeds(&self) -> std::ops::Range<u64> {
        self.first_seed..self.first_seed + self.emitters as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub auxiliary: EmitterGroup,
    pub pool: EmitterGroup,
    pub severity: f64,
    pub snr_db: f64,
    pub burst: BurstConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            auxiliary: EmitterGroup { first_seed: 1000, emitters: 20, bursts_per_emitter: 100 },
            pool: EmitterGroup { first_seed: 5000, emitters: 10, bursts_per_emitter: 100 },
            severity: 0.7,
            snr_db: 20.0,
            burst: BurstConfig::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let (a, p) = (self.auxiliary.seeds(), self.pool.seeds());
        if a.start < p.end && p.start < a.end {
            return Err(CliError::Config(format!(
                "auxiliary emitter seeds {a:?} overlap pool emitter seeds {p:?}; the two emitter sets must be disjoint"
            )));
        }
        if !(0.0..=1.0).contains(&self.severity) {
            return Err(CliError::Config(format!("severity must lie in [0, 1], got {}", self.severity)));
        }
        if self.auxiliary.emitters < 2 || self.pool.emitters < 2 {
            return Err(CliError::Config("each emitter group needs at least 2 emitters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub train: TrainConfig,
    pub fewshot: FewShotConfig,
    pub shots: Vec<usize>,
    pub variants: Vec<String>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            train: TrainConfig::desk(),
            fewshot: FewShotConfig::default(),
            shots: vec![1, 5, 10],
            variants: ["S", "ST", "SC", "STC"].map(String::from).to_vec(),
        }
    }
}
