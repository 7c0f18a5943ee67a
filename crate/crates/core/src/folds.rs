use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DmlError, Result};

/// Assignment of rows to cross-fitting folds. Fold indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPartition {
    assignment: Vec<usize>,
    folds: usize,
}

/// Uniform shuffle followed by contiguous blocks. Block sizes differ by at
/// most one and the remainder rows go to the last folds.
pub fn partition_folds(n: usize, folds: usize, seed: u64) -> Result<FoldPartition> {
    if folds < 2 || n < 2 * folds {
        return Err(DmlError::PartitionInfeasible { n, folds });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = n / folds;
    let extra = n % folds;
    let mut assignment = vec![0; n];
    let mut pos = 0;
    for f in 0..folds {
        let size = base + usize::from(f >= folds - extra);
        for &row in &order[pos..pos + size] {
            assignment[row] = f;
        }
        pos += size;
    }
    Ok(FoldPartition { assignment, folds })
}

impl FoldPartition {
    /// Wraps an explicit assignment; every fold must be nonempty.
    pub fn from_assignment(assignment: Vec<usize>, folds: usize) -> Result<Self> {
        let mut counts = vec![0usize; folds];
        for &f in &assignment {
            if f >= folds {
                return Err(DmlError::InvalidArgument(format!("fold index {f} out of range for {folds} folds")));
            }
            counts[f] += 1;
        }
        if folds < 2 || counts.contains(&0) {
            return Err(DmlError::PartitionInfeasible { n: assignment.len(), folds });
        }
        Ok(FoldPartition { assignment, folds })
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_folds(&self) -> usize {
        self.folds
    }

    pub fn fold_of(&self, row: usize) -> usize {
        self.assignment[row]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Held-out rows of `fold`, ascending.
    pub fn held_out(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] == fold).collect()
    }

    /// Training rows (complement of `fold`), ascending.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.folds];
        for &f in &self.assignment {
            s[f] += 1;
        }
        s
    }
}
