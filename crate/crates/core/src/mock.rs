//! Synthetic labeled pools drawn from a confusion matrix.
//!
//! A pool is an ordered queue of (ground truth, assigned label) pairs whose
//! per-cell counts match the largest-remainder rounding of `n * cm`. The
//! initial order is a uniform shuffle, so without further reordering each
//! batch sees roughly the global label distribution.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;

const SUM_TOLERANCE: f64 = 1e-9;

/// Joint distribution of (true label, assigned label) cells.
///
/// Row index is the true label, column index the assigned label. For the
/// binary case the cells read `[[tn, fp], [fn, tp]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    cells: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    /// Validates cell ranges and that the cells sum to 1.
    pub fn new(cells: Vec<Vec<f64>>) -> Result<Self, SimError> {
        let c = cells.len();
        if c < 2 {
            return Err(SimError::InvalidConfusionMatrix(format!(
                "class count must be >= 2, got {c}"
            )));
        }
        let mut sum = 0.0;
        for (i, row) in cells.iter().enumerate() {
            if row.len() != c {
                return Err(SimError::InvalidConfusionMatrix(format!(
                    "row {i} has {} cells, expected {c}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || v.is_nan() {
                    return Err(SimError::InvalidConfusionMatrix(format!(
                        "cell[{i}][{j}] = {v} is outside [0, 1]"
                    )));
                }
                sum += v;
            }
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(SimError::InvalidConfusionMatrix(format!(
                "cells sum to {sum}, expected 1"
            )));
        }
        Ok(Self { cells })
    }

    /// Binary convenience constructor: `[[tn, fp], [fn, tp]]`.
    pub fn binary(tn: f64, fp: f64, fn_: f64, tp: f64) -> Result<Self, SimError> {
        Self::new(vec![vec![tn, fp], vec![fn_, tp]])
    }

    pub fn class_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, gt: usize, ml: usize) -> f64 {
        self.cells[gt][ml]
    }

    pub fn cells(&self) -> &[Vec<f64>] {
        &self.cells
    }
}

/// One queued object: its ground-truth class and its current assigned label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub gt: usize,
    pub ml: usize,
}

/// Ordered queue of objects awaiting quality assurance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPool {
    class_count: usize,
    items: Vec<Item>,
}

impl LabeledPool {
    pub fn from_items(class_count: usize, items: Vec<Item>) -> Self {
        debug_assert!(items
            .iter()
            .all(|it| it.gt < class_count && it.ml < class_count));
        Self { class_count, items }
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    /// Removes and returns the first `min(n_batch, len)` items.
    pub fn extract_batch(&mut self, n_batch: usize) -> Vec<Item> {
        assert!(!self.items.is_empty(), "extract_batch on empty pool");
        let k = n_batch.min(self.items.len());
        self.items.drain(..k).collect()
    }

    pub(crate) fn items_mut(&mut self) -> &mut Vec<Item> {
        &mut self.items
    }
}

/// Largest-remainder apportionment of `n * cm` into integer cell counts.
///
/// Ties in the fractional remainders are broken by row-major cell order,
/// so the result is deterministic and sums to `n` exactly.
pub fn cell_counts(n: usize, cm: &ConfusionMatrix) -> Vec<Vec<usize>> {
    let c = cm.class_count();
    let mut counts = vec![vec![0usize; c]; c];
    let mut remainders: Vec<(f64, usize, usize)> = Vec::with_capacity(c * c);
    let mut assigned = 0usize;
    for i in 0..c {
        for j in 0..c {
            let exact = n as f64 * cm.cell(i, j);
            let floor = exact.floor() as usize;
            counts[i][j] = floor;
            assigned += floor;
            remainders.push((exact - floor as f64, i, j));
        }
    }
    // Stable sort keeps row-major order among equal remainders.
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut leftover = n - assigned;
    for (_, i, j) in remainders {
        if leftover == 0 {
            break;
        }
        counts[i][j] += 1;
        leftover -= 1;
    }
    counts
}

/// Builds a pool of `n` items matching `cell_counts(n, cm)`, uniformly shuffled.
pub fn create_mock_dataset<R: Rng>(
    n: usize,
    cm: &ConfusionMatrix,
    rng: &mut R,
) -> Result<LabeledPool, SimError> {
    if n == 0 {
        return Err(SimError::InvalidConfig("object count must be >= 1".into()));
    }
    let counts = cell_counts(n, cm);
    let c = cm.class_count();
    let mut items = Vec::with_capacity(n);
    for (i, row) in counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            items.extend(std::iter::repeat(Item { gt: i, ml: j }).take(count));
        }
    }
    items.shuffle(rng);
    Ok(LabeledPool::from_items(c, items))
}

/// Counts (gt, ml) pairs per cell. Used as the permutation-invariance oracle.
pub fn pool_confusion(pool: &LabeledPool) -> Vec<Vec<usize>> {
    let c = pool.class_count();
    let mut counts = vec![vec![0usize; c]; c];
    for item in pool.items() {
        counts[item.gt][item.ml] += 1;
    }
    counts
}
