use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DatasetError, FeatureDataset};
use crate::rng::SeededRng;

/// Train / validation / test proportions summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self, DatasetError> {
        let parts = [train, valid, test];
        if parts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(DatasetError::InvalidSplit("ratios must be positive".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplit("ratios must sum to 1".into()));
        }
        Ok(Self { train, valid, test })
    }

    /// Normalizes arbitrary positive weights such as `7:1:2`.
    pub fn from_weights(train: f64, valid: f64, test: f64) -> Result<Self, DatasetError> {
        let total = train + valid + test;
        if !(total.is_finite() && total > 0.0) {
            return Err(DatasetError::InvalidSplit("ratio weights must be positive".into()));
        }
        Self::new(train / total, valid / total, test / total)
    }

    fn weights(&self) -> [f64; 3] {
        [self.train, self.valid, self.test]
    }
}

impl FromStr for SplitRatios {
    type Err = DatasetError;

    /// Parses `a:b:c`, e.g. `8:1:1` or `5:2.5:2.5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| DatasetError::InvalidSplit(format!("cannot parse ratios {s:?}")))?;
        match parts[..] {
            [a, b, c] => Self::from_weights(a, b, c),
            _ => Err(DatasetError::InvalidSplit(format!("expected a:b:c, got {s:?}"))),
        }
    }
}

/// Disjoint index lists into a dataset's samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<u32>,
    pub valid: Vec<u32>,
    pub test: Vec<u32>,
}

impl SplitAssignment {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }

    /// Checks that every index is below `n` and no index appears twice.
    pub fn validate(&self, n: usize) -> Result<(), DatasetError> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.valid).chain(&self.test) {
            let slot = seen
                .get_mut(i as usize)
                .ok_or_else(|| DatasetError::InvalidSplit(format!("index {i} out of range {n}")))?;
            if *slot {
                return Err(DatasetError::InvalidSplit(format!("index {i} assigned twice")));
            }
            *slot = true;
        }
        Ok(())
    }
}

/// Apportions `n` items by `weights` (summing to one): floors first, then the
/// leftover units go to the largest fractional parts, lowest index on ties.
pub fn largest_remainder(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Shuffles `indices` and cuts them into contiguous train / valid / test runs.
pub fn random_split_indices(indices: &[u32], ratios: SplitRatios, seed: u64) -> Result<SplitAssignment, DatasetError> {
    if indices.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut order = indices.to_vec();
    SeededRng::new(seed).shuffle(&mut order);
    let sizes = largest_remainder(order.len(), &ratios.weights());
    let test = order.split_off(sizes[0] + sizes[1]);
    let valid = order.split_off(sizes[0]);
    Ok(SplitAssignment {
        train: order,
        valid,
        test,
    })
}

pub fn random_split(ds: &FeatureDataset, ratios: SplitRatios, seed: u64) -> Result<SplitAssignment, DatasetError> {
    let all: Vec<u32> = (0..ds.len() as u32).collect();
    random_split_indices(&all, ratios, seed)
}

/// Stratified k-fold over raw labels. Each class is shuffled and dealt
/// round-robin, continuing the rotation across classes so fold totals also
/// differ by at most one. Folds are returned with sorted indices.
pub fn stratified_kfold_labels(
    labels: &[u32],
    num_classes: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<u32>>, DatasetError> {
    if k == 0 {
        return Err(DatasetError::InvalidSplit("k must be positive".into()));
    }
    let mut by_class: Vec<Vec<u32>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        let class = by_class
            .get_mut(l as usize)
            .ok_or_else(|| DatasetError::InvalidSplit(format!("label {l} outside {num_classes} classes")))?;
        class.push(i as u32);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(DatasetError::DeficientClass {
                class: c as u32,
                count: members.len(),
                k,
            });
        }
    }
    let mut rng = SeededRng::new(seed);
    let mut folds = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for mut members in by_class {
        rng.shuffle(&mut members);
        for idx in members {
            folds[cursor % k].push(idx);
            cursor += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

pub fn stratified_kfold(ds: &FeatureDataset, k: usize, seed: u64) -> Result<Vec<Vec<u32>>, DatasetError> {
    stratified_kfold_labels(&ds.labels(), ds.num_classes, k, seed)
}

/// Random split of a single fold's indices.
pub fn select_fold_split(
    folds: &[Vec<u32>],
    fold_index: usize,
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment, DatasetError> {
    let fold = folds.get(fold_index).ok_or(DatasetError::FoldOutOfRange {
        index: fold_index,
        folds: folds.len(),
    })?;
    random_split_indices(fold, ratios, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn range(n: u32) -> Vec<u32> {
        (0..n).collect()
    }

    #[test]
    fn parses_ratio_strings() {
        let r: SplitRatios = "7:1:2".parse().unwrap();
        assert!((r.train - 0.7).abs() < 1e-12);
        let r: SplitRatios = "5:2.5:2.5".parse().unwrap();
        assert!((r.valid - 0.25).abs() < 1e-12);
        assert!("1:2".parse::<SplitRatios>().is_err());
        assert!("a:b:c".parse::<SplitRatios>().is_err());
        assert!(SplitRatios::new(0.5, 0.5, 0.5).is_err());
        assert!(SplitRatios::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn largest_remainder_small_cases() {
        assert_eq!(largest_remainder(10, &[0.7, 0.1, 0.2]), vec![7, 1, 2]);
        assert_eq!(largest_remainder(11, &[0.7, 0.1, 0.2]), vec![8, 1, 2]);
        assert_eq!(largest_remainder(3, &[1.0 / 3.0; 3]), vec![1, 1, 1]);
        assert_eq!(largest_remainder(2, &[1.0 / 3.0; 3]), vec![1, 1, 0]);
    }

    #[test]
    fn deterministic_and_disjoint() {
        let r = SplitRatios::from_weights(8.0, 1.0, 1.0).unwrap();
        let a = random_split_indices(&range(1000), r, 5).unwrap();
        assert_eq!(a, random_split_indices(&range(1000), r, 5).unwrap());
        assert_ne!(a, random_split_indices(&range(1000), r, 6).unwrap());
        a.validate(1000).unwrap();
        assert_eq!(a.sizes(), (800, 100, 100));
        assert!(matches!(random_split_indices(&[], r, 0), Err(DatasetError::Empty)));
    }

    #[test]
    fn kfold_boundaries() {
        let labels: Vec<u32> = (0..40).map(|i| i % 4).collect();
        let one = stratified_kfold_labels(&labels, 4, 1, 0).unwrap();
        assert_eq!(one, vec![range(40)]);
        assert!(matches!(
            stratified_kfold_labels(&labels, 4, 11, 0),
            Err(DatasetError::DeficientClass { .. })
        ));
        let folds = stratified_kfold_labels(&labels, 4, 10, 0).unwrap();
        assert!(matches!(
            select_fold_split(&folds, 10, SplitRatios::new(0.8, 0.1, 0.1).unwrap(), 0),
            Err(DatasetError::FoldOutOfRange { index: 10, folds: 10 })
        ));
    }

    #[test]
    fn single_fold_reduces_to_random_split() {
        let labels: Vec<u32> = (0..50).map(|i| i % 2).collect();
        let folds = stratified_kfold_labels(&labels, 2, 1, 3).unwrap();
        let r = SplitRatios::new(0.8, 0.1, 0.1).unwrap();
        assert_eq!(
            select_fold_split(&folds, 0, r, 9).unwrap(),
            random_split_indices(&range(50), r, 9).unwrap()
        );
    }

    proptest! {
        #[test]
        fn split_sizes_sum_and_track_ratio(n in 1usize..5000, a in 1u32..10, b in 1u32..10, c in 1u32..10, seed: u64) {
            let r = SplitRatios::from_weights(a as f64, b as f64, c as f64).unwrap();
            let s = random_split_indices(&(0..n as u32).collect::<Vec<_>>(), r, seed).unwrap();
            let (t, v, e) = s.sizes();
            prop_assert_eq!(t + v + e, n);
            for (size, w) in [(t, r.train), (v, r.valid), (e, r.test)] {
                prop_assert!((size as f64 - w * n as f64).abs() < 1.0 + 1e-9);
            }
            prop_assert!(s.validate(n).is_ok());
        }

        #[test]
        fn kfold_is_stratified_partition(
            counts in proptest::collection::vec(5usize..60, 2..6),
            k in 1usize..6,
            seed: u64,
        ) {
            let mut labels = Vec::new();
            for (c, &n) in counts.iter().enumerate() {
                labels.extend(std::iter::repeat_n(c as u32, n));
            }
            let folds = stratified_kfold_labels(&labels, counts.len(), k, seed).unwrap();
            let mut all: Vec<u32> = folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len() as u32).collect::<Vec<_>>());
            for c in 0..counts.len() as u32 {
                let per: Vec<usize> = folds
                    .iter()
                    .map(|f| f.iter().filter(|&&i| labels[i as usize] == c).count())
                    .collect();
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
        }
    }
}
