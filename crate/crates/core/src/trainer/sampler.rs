use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};

/// Class-balanced mini-batches of `classes_per_batch x per_class` samples.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    groups: Vec<Vec<usize>>,
    classes_per_batch: usize,
    per_class: usize,
}

impl BatchSampler {
    /// `labels[i]` is the class of sample `i`; classes with fewer than
    /// `per_class` samples are never drawn.
    pub fn new(labels: &[usize], class_count: usize, classes_per_batch: usize, per_class: usize) -> Result<Self> {
        if classes_per_batch == 0 || per_class == 0 {
            return Err(Error::InvalidConfig("batch dimensions must be >= 1".into()));
        }
        let mut groups = vec![Vec::new(); class_count];
        for (i, &l) in labels.iter().enumerate() {
            if l >= class_count {
                return Err(Error::LabelOutOfRange { label: l, classes: class_count });
            }
            groups[l].push(i);
        }
        let eligible = groups.iter().filter(|g| g.len() >= per_class).count();
        if eligible < classes_per_batch {
            return Err(Error::InsufficientClassData(format!(
                "{eligible} classes have at least {per_class} samples, {classes_per_batch} needed per batch"
            )));
        }
        Ok(BatchSampler { groups, classes_per_batch, per_class })
    }

    pub fn batch_size(&self) -> usize {
        self.classes_per_batch * self.per_class
    }

    /// One independent batch: distinct classes, distinct samples.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let eligible: Vec<&Vec<usize>> = self.groups.iter().filter(|g| g.len() >= self.per_class).collect();
        let mut out = Vec::with_capacity(self.batch_size());
        for group in eligible.choose_multiple(rng, self.classes_per_batch) {
            out.extend(group.choose_multiple(rng, self.per_class).copied());
        }
        out
    }

    /// All batches of one epoch. Each class is shuffled and cut into chunks
    /// of `per_class`; batches take one chunk from each of
    /// `classes_per_batch` random classes that still have chunks. Every
    /// sample appears at most once.
    pub fn epoch<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<usize>> {
        let mut chunks: Vec<Vec<Vec<usize>>> = self
            .groups
            .iter()
            .map(|g| {
                let mut g = g.clone();
                g.shuffle(rng);
                g.chunks_exact(self.per_class).map(<[usize]>::to_vec).rev().collect()
            })
            .collect();
        let mut batches = Vec::new();
        loop {
            let open: Vec<usize> = (0..chunks.len()).filter(|&c| !chunks[c].is_empty()).collect();
            if open.len() < self.classes_per_batch {
                break;
            }
            let mut batch = Vec::with_capacity(self.batch_size());
            for &c in open.choose_multiple(rng, self.classes_per_batch) {
                batch.extend(chunks[c].pop().expect("open class has a chunk"));
            }
            batches.push(batch);
        }
        batches
    }
}

/// One `(anchor, positive, negative)` triplet per batch element, with a
/// uniformly random positive from the same class and negative from another.
pub fn mine_triplets<R: Rng + ?Sized>(labels: &[usize], rng: &mut R) -> Result<Vec<(usize, usize, usize)>> {
    let mut out = Vec::with_capacity(labels.len());
    for (a, &y) in labels.iter().enumerate() {
        let pos: Vec<usize> = (0..labels.len()).filter(|&i| i != a && labels[i] == y).collect();
        let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != y).collect();
        match (pos.choose(rng), neg.choose(rng)) {
            (Some(&p), Some(&n)) => out.push((a, p, n)),
            (None, _) => return Err(Error::NoValidTriplet(format!("sample {a} has no positive in the batch"))),
            (_, None) => return Err(Error::NoValidTriplet("batch contains a single class".into())),
        }
    }
    Ok(out)
}
