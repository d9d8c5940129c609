use rand::seq::SliceRandom;
use rand::Rng;

use super::{Dataset, ExampleSpec, Label, TimelineError};

/// Endless stream of class-balanced batches.
///
/// Negatives are drawn without replacement from a shuffled pass over all
/// negatives, reshuffled when exhausted; positives cycle the same way.
#[derive(Debug, Clone)]
pub struct BalancedBatches<R> {
    positives: Vec<ExampleSpec>,
    negatives: Vec<ExampleSpec>,
    pos_order: Vec<usize>,
    neg_order: Vec<usize>,
    pos_cursor: usize,
    neg_cursor: usize,
    half: usize,
    rng: R,
}

pub fn balanced_batches<R: Rng>(
    dataset: &Dataset,
    batch_size: usize,
    rng: R,
) -> Result<BalancedBatches<R>, TimelineError> {
    if batch_size < 2 || batch_size % 2 != 0 {
        return Err(TimelineError::InvalidBatchSize(batch_size));
    }
    let positives: Vec<ExampleSpec> = dataset.positives().cloned().collect();
    let negatives: Vec<ExampleSpec> = dataset.negatives().cloned().collect();
    if positives.is_empty() {
        return Err(TimelineError::MissingClass(Label::Positive));
    }
    if negatives.is_empty() {
        return Err(TimelineError::MissingClass(Label::Negative));
    }
    Ok(BalancedBatches {
        pos_order: Vec::new(),
        neg_order: Vec::new(),
        pos_cursor: 0,
        neg_cursor: 0,
        half: batch_size / 2,
        positives,
        negatives,
        rng,
    })
}

impl<R: Rng> BalancedBatches<R> {
    /// Batches needed to visit every negative once.
    pub fn batches_per_epoch(&self) -> usize {
        self.negatives.len().div_ceil(self.half)
    }

    fn draw(order: &mut Vec<usize>, cursor: &mut usize, len: usize, rng: &mut R) -> usize {
        if *cursor >= order.len() {
            *order = (0..len).collect();
            order.shuffle(rng);
            *cursor = 0;
        }
        let idx = order[*cursor];
        *cursor += 1;
        idx
    }
}

impl<R: Rng> Iterator for BalancedBatches<R> {
    type Item = Vec<ExampleSpec>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut batch = Vec::with_capacity(self.half * 2);
        for _ in 0..self.half {
            let i = Self::draw(&mut self.pos_order, &mut self.pos_cursor, self.positives.len(), &mut self.rng);
            batch.push(self.positives[i].clone());
        }
        for _ in 0..self.half {
            let i = Self::draw(&mut self.neg_order, &mut self.neg_cursor, self.negatives.len(), &mut self.rng);
            batch.push(self.negatives[i].clone());
        }
        batch.shuffle(&mut self.rng);
        Some(batch)
    }
}
