use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    /// Fold of each sample index.
    pub assignment: Vec<usize>,
}

impl FoldAssignment {
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Held-out indices of fold `f`, ascending.
    pub fn validation(&self, f: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignment[i] == f).collect()
    }

    /// Indices outside fold `f`, ascending.
    pub fn training(&self, f: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignment[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle of `0..n`, then the i-th shuffled index goes to fold `i mod k`.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::contract(format!("need 2 <= k <= n, got k={k}, n={n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut SeededRng::new(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldAssignment { k, seed, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leave_one_out() {
        let f = kfold_split(10, 10, 3).unwrap();
        assert_eq!(f.fold_sizes(), vec![1; 10]);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(kfold_split(3, 4, 0).is_err());
        assert!(kfold_split(5, 1, 0).is_err());
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(kfold_split(100, 7, 11).unwrap(), kfold_split(100, 7, 11).unwrap());
        assert_ne!(kfold_split(100, 7, 11).unwrap(), kfold_split(100, 7, 12).unwrap());
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(n in 2usize..300, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
            let k = 2 + ((n - 2) as f64 * k_frac) as usize;
            let f = kfold_split(n, k, seed).unwrap();
            let sizes = f.fold_sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for fold in 0..k {
                let mut all = f.training(fold);
                all.extend(f.validation(fold));
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
