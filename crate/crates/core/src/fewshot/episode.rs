use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::FewShotConfig;
use crate::error::{Error, Result};
use crate::signal_sim::{DatasetRole, LabeledDataset};

/// Classes and test samples fixed for a series of episodes. Each episode
/// then draws its own `shots` training samples per class from the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShotPlan {
    /// Pool labels of the chosen classes; episode label `i` is `classes[i]`.
    pub classes: Vec<usize>,
    /// Pool indices of the test samples, grouped by class.
    pub test: Vec<usize>,
    pub test_labels: Vec<usize>,
    /// Pool indices eligible as training shots, per episode class.
    candidates: Vec<Vec<usize>>,
    shots: usize,
}

impl FewShotPlan {
    pub fn new<R: Rng + ?Sized>(pool: &LabeledDataset, config: &FewShotConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let need = config.shots + config.test_per_class;
        let groups = pool.indices_by_class();
        let eligible: Vec<usize> = (0..groups.len()).filter(|&c| groups[c].len() >= need).collect();
        if eligible.len() < config.ways {
            return Err(Error::InsufficientData(format!(
                "{} pool classes have at least {need} samples, {} ways requested",
                eligible.len(),
                config.ways
            )));
        }
        let mut classes: Vec<usize> = eligible.choose_multiple(rng, config.ways).copied().collect();
        classes.sort_unstable();
        let mut test = Vec::new();
        let mut test_labels = Vec::new();
        let mut candidates = Vec::new();
        for (label, &c) in classes.iter().enumerate() {
            let mut g = groups[c].clone();
            g.shuffle(rng);
            let (t, rest) = g.split_at(config.test_per_class);
            test.extend_from_slice(t);
            test_labels.extend(std::iter::repeat_n(label, t.len()));
            candidates.push(rest.to_vec());
        }
        Ok(FewShotPlan { classes, test, test_labels, candidates, shots: config.shots })
    }

    /// The plan used by [`monte_carlo`](super::monte_carlo): drawn from
    /// substream 0 of `config.seed`.
    pub fn for_config(pool: &LabeledDataset, config: &FewShotConfig) -> Result<Self> {
        Self::new(pool, config, &mut crate::rng::substream(config.seed, 0))
    }

    pub fn ways(&self) -> usize {
        self.classes.len()
    }

    /// `(pool indices, episode labels)` of one episode's training shots.
    pub fn draw_train<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let mut idx = Vec::with_capacity(self.ways() * self.shots);
        let mut labels = Vec::with_capacity(idx.capacity());
        for (label, cand) in self.candidates.iter().enumerate() {
            idx.extend(cand.choose_multiple(rng, self.shots).copied());
            labels.extend(std::iter::repeat_n(label, self.shots));
        }
        (idx, labels)
    }
}

fn relabeled(pool: &LabeledDataset, idx: &[usize], labels: Vec<usize>, ways: usize, role: DatasetRole) -> Result<LabeledDataset> {
    let signals = idx.iter().map(|&i| pool.signals[i].clone()).collect();
    LabeledDataset::new(signals, labels, ways, role, pool.provenance.clone())
}

/// One few-shot split: `ways` classes, `shots` training and
/// `test_per_class` disjoint test samples each, labels remapped to
/// `0..ways`.
pub fn split_fewshot<R: Rng + ?Sized>(pool: &LabeledDataset, config: &FewShotConfig, rng: &mut R) -> Result<(LabeledDataset, LabeledDataset)> {
    let plan = FewShotPlan::new(pool, config, rng)?;
    let (tr, tr_labels) = plan.draw_train(rng);
    let d_tr = relabeled(pool, &tr, tr_labels, plan.ways(), DatasetRole::FewshotTrain)?;
    let d_te = relabeled(pool, &plan.test, plan.test_labels.clone(), plan.ways(), DatasetRole::Test)?;
    Ok((d_tr, d_te))
}
