//! Capacity-bounded store of positive samples appended to every batch so
//! the regularizer always sees positives.
//!
//! The buffer behaves as a priority queue: a pushed sample joins the
//! entries first and then, if over capacity, one entry is evicted according
//! to the maintenance strategy. Under `DequeueMax` the evicted entry is the
//! one the model is most certain about (highest score), so the buffer
//! retains the hardest positives; the incoming sample itself may be the
//! eviction victim.

use crate::data::Sample;
use crate::error::{invalid, Result};

/// Which entry leaves a full buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictionStrategy {
    /// Evict the maximum last_score (the most confident positive).
    DequeueMax,
    /// Evict the oldest entry.
    Fifo,
    /// Evict the minimum last_score (the least confident positive).
    DequeueMin,
}

impl EvictionStrategy {
    pub const ALL: [EvictionStrategy; 3] = [
        EvictionStrategy::DequeueMax,
        EvictionStrategy::Fifo,
        EvictionStrategy::DequeueMin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvictionStrategy::DequeueMax => "dequeue-max",
            EvictionStrategy::Fifo => "fifo",
            EvictionStrategy::DequeueMin => "dequeue-min",
        }
    }

    pub fn parse(name: &str) -> Result<EvictionStrategy> {
        Ok(match name {
            "dequeue-max" => EvictionStrategy::DequeueMax,
            "fifo" => EvictionStrategy::Fifo,
            "dequeue-min" => EvictionStrategy::DequeueMin,
            _ => return Err(crate::error::config(format!("unknown buffer strategy: {name}"))),
        })
    }
}

impl std::fmt::Display for EvictionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
struct Entry {
    sample: Sample,
    last_score: f64,
    arrival: u64,
}

/// Buffer of positive samples keyed by the model score recorded at push
/// time (refreshed via [`PositiveBuffer::refresh_scores`]).
///
/// A capacity of zero disables the buffer: pushes bounce straight back.
#[derive(Debug, Clone)]
pub struct PositiveBuffer {
    capacity: usize,
    strategy: EvictionStrategy,
    entries: Vec<Entry>,
    next_arrival: u64,
}

impl PositiveBuffer {
    pub fn new(capacity: usize, strategy: EvictionStrategy) -> PositiveBuffer {
        PositiveBuffer {
            capacity,
            strategy,
            entries: Vec::with_capacity(capacity),
            next_arrival: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn strategy(&self) -> EvictionStrategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    /// Stored samples, oldest insertion first.
    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.entries.iter().map(|e| &e.sample)
    }

    /// Current eviction keys, parallel to [`PositiveBuffer::samples`].
    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.last_score).collect()
    }

    /// Insert a positive sample keyed by its current model score; if the
    /// buffer exceeds capacity the strategy picks one entry (possibly the
    /// incoming one) to evict, which is returned.
    pub fn push(&mut self, sample: Sample, score: f64) -> Result<Option<Sample>> {
        if sample.label != 1 {
            return Err(invalid("buffer only stores positive samples"));
        }
        if !score.is_finite() {
            return Err(invalid(format!("buffer push with non-finite score {score}")));
        }
        self.entries.push(Entry {
            sample,
            last_score: score,
            arrival: self.next_arrival,
        });
        self.next_arrival += 1;
        if self.entries.len() <= self.capacity {
            return Ok(None);
        }
        let victim = match self.strategy {
            EvictionStrategy::DequeueMax => self
                .entries
                .iter()
                .enumerate()
                .max_by(|(ai, a), (bi, b)| {
                    a.last_score
                        .total_cmp(&b.last_score)
                        .then(bi.cmp(ai)) // ties: earliest entry wins
                })
                .map(|(i, _)| i)
                .expect("nonempty"),
            EvictionStrategy::DequeueMin => self
                .entries
                .iter()
                .enumerate()
                .min_by(|(ai, a), (bi, b)| {
                    a.last_score.total_cmp(&b.last_score).then(ai.cmp(bi))
                })
                .map(|(i, _)| i)
                .expect("nonempty"),
            EvictionStrategy::Fifo => self
                .entries
                .iter()
                .enumerate()
                .min_by_key(|(_, e)| e.arrival)
                .map(|(i, _)| i)
                .expect("nonempty"),
        };
        Ok(Some(self.entries.remove(victim).sample))
    }

    /// Recompute every entry's eviction key with the current model. Entry
    /// order is unchanged.
    pub fn refresh_scores(&mut self, mut scorer: impl FnMut(&Sample) -> f64) {
        for e in &mut self.entries {
            e.last_score = scorer(&e.sample);
        }
    }
}

/// Where a merged-batch row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Batch,
    Buffer,
}

/// Batch rows followed by the whole buffer, each row tagged with its origin.
#[derive(Debug, Clone)]
pub struct MergedBatch {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub origins: Vec<Origin>,
}

impl MergedBatch {
    /// Number of rows that came from the batch (they occupy the prefix).
    pub fn batch_len(&self) -> usize {
        self.origins.iter().filter(|&&o| o == Origin::Batch).count()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// The whole buffer is always appended to the batch, in stable
/// batch-then-buffer order.
pub fn merged_batch(batch: &[Sample], buffer: &PositiveBuffer) -> MergedBatch {
    let total = batch.len() + buffer.len();
    let mut features = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    let mut origins = Vec::with_capacity(total);
    for s in batch {
        features.push(s.features.clone());
        labels.push(s.label);
        origins.push(Origin::Batch);
    }
    for s in buffer.samples() {
        features.push(s.features.clone());
        labels.push(s.label);
        origins.push(Origin::Buffer);
    }
    MergedBatch {
        features,
        labels,
        origins,
    }
}
