//! Fold partitions of `{0, .., n-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partition of the row indices into `k >= 2` nonempty folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<usize>>", try_from = "Vec<Vec<usize>>")]
pub struct FoldPartition {
    folds: Vec<Vec<usize>>,
    fold_of: Vec<usize>,
}

impl From<FoldPartition> for Vec<Vec<usize>> {
    fn from(p: FoldPartition) -> Self {
        p.folds
    }
}

impl TryFrom<Vec<Vec<usize>>> for FoldPartition {
    type Error = Error;

    fn try_from(folds: Vec<Vec<usize>>) -> Result<Self> {
        let n = folds.iter().map(Vec::len).sum();
        FoldPartition::new(folds, n)
    }
}

impl FoldPartition {
    pub fn new(folds: Vec<Vec<usize>>, n: usize) -> Result<FoldPartition> {
        if let Some(j) = folds.iter().position(|f| f.is_empty()) {
            return Err(Error::EmptyFold(j));
        }
        if folds.len() < 2 {
            return Err(Error::FoldLeavesNothing(0));
        }
        let mut fold_of = vec![usize::MAX; n];
        for (j, fold) in folds.iter().enumerate() {
            for &i in fold {
                if i >= n {
                    return Err(Error::InvalidPartition(format!("index {i} out of range for n = {n}")));
                }
                if fold_of[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("index {i} appears twice")));
                }
                fold_of[i] = j;
            }
        }
        if let Some(i) = fold_of.iter().position(|&j| j == usize::MAX) {
            return Err(Error::InvalidPartition(format!("index {i} is not covered")));
        }
        Ok(FoldPartition { folds, fold_of })
    }

    /// Leave-one-out: fold `i` is `{i}`.
    pub fn singletons(n: usize) -> Result<FoldPartition> {
        FoldPartition::new((0..n).map(|i| vec![i]).collect(), n)
    }

    /// `k` contiguous blocks whose sizes differ by at most one.
    pub fn contiguous(n: usize, k: usize) -> Result<FoldPartition> {
        if k == 0 || k > n {
            return Err(Error::InvalidPartition(format!("cannot split {n} rows into {k} folds")));
        }
        let (base, extra) = (n / k, n % k);
        let mut folds = Vec::with_capacity(k);
        let mut start = 0;
        for j in 0..k {
            let len = base + usize::from(j < extra);
            folds.push((start..start + len).collect());
            start += len;
        }
        FoldPartition::new(folds, n)
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn fold(&self, j: usize) -> &[usize] {
        &self.folds[j]
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.fold_of[i]
    }

    /// Indices outside fold `j`, ascending.
    pub fn complement(&self, j: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != j).collect()
    }

    /// Weight `1 / (k |K_j|)` carried by each index of fold `j`.
    pub fn atom_weight(&self, j: usize) -> f64 {
        1.0 / (self.k() as f64 * self.folds[j].len() as f64)
    }

    pub fn is_balanced(&self) -> bool {
        let first = self.folds[0].len();
        self.folds.iter().all(|f| f.len() == first)
    }
}

/// How a partition is built for a sample of size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PartitionRule {
    LeaveOneOut,
    KFold { k: usize },
}

impl PartitionRule {
    pub fn build(&self, n: usize) -> Result<FoldPartition> {
        match *self {
            PartitionRule::LeaveOneOut => FoldPartition::singletons(n),
            PartitionRule::KFold { k } if k >= n => FoldPartition::singletons(n),
            PartitionRule::KFold { k } => FoldPartition::contiguous(n, k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_sizes() {
        let p = FoldPartition::contiguous(10, 3).unwrap();
        let sizes: Vec<usize> = p.folds().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        assert_eq!(p.fold_of(4), 1);
        assert_eq!(p.complement(0), (4..10).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_partitions() {
        assert_eq!(FoldPartition::new(vec![vec![0], vec![]], 1), Err(Error::EmptyFold(1)));
        assert_eq!(FoldPartition::new(vec![vec![0, 1]], 2), Err(Error::FoldLeavesNothing(0)));
        assert!(matches!(FoldPartition::new(vec![vec![0], vec![0]], 2), Err(Error::InvalidPartition(_))));
        assert!(matches!(FoldPartition::new(vec![vec![0], vec![2]], 3), Err(Error::InvalidPartition(_))));
        assert!(matches!(FoldPartition::contiguous(3, 1), Err(Error::FoldLeavesNothing(0))));
    }

    #[test]
    fn weights() {
        let p = FoldPartition::new(vec![vec![0, 1], vec![2]], 3).unwrap();
        assert_eq!(p.atom_weight(0), 0.25);
        assert_eq!(p.atom_weight(1), 0.5);
        assert!(!p.is_balanced());
        assert!(FoldPartition::singletons(5).unwrap().is_balanced());
    }
}
