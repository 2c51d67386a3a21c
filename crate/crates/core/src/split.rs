//! Deterministic train / calibration splits.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Disjoint index sets for training and up to two calibration folds.
///
/// `cal2` is empty for methods that use a single calibration set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_idx: Vec<usize>,
    pub cal1_idx: Vec<usize>,
    pub cal2_idx: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    /// Consecutive blocks `[0, a)`, `[a, a+b)`, `[a+b, a+b+c)`. Used when the
    /// rows are already i.i.d. in generation order.
    pub fn contiguous(sizes: [usize; 3]) -> Self {
        let [a, b, c] = sizes;
        Self {
            train_idx: (0..a).collect(),
            cal1_idx: (a..a + b).collect(),
            cal2_idx: (a + b..a + b + c).collect(),
            seed: 0,
        }
    }

    /// All calibration indices (`cal1` followed by `cal2`).
    pub fn calibration(&self) -> Vec<usize> {
        let mut all = self.cal1_idx.clone();
        all.extend_from_slice(&self.cal2_idx);
        all
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.train_idx.len(), self.cal1_idx.len(), self.cal2_idx.len()]
    }

    /// Checks disjointness and range against a dataset of `n` rows.
    pub fn validate(&self, n: usize, need_cal2: bool) -> Result<()> {
        if self.train_idx.is_empty() || self.cal1_idx.is_empty() {
            return Err(Error::SplitTooSmall(
                "training and calibration parts must be non-empty".into(),
            ));
        }
        if need_cal2 && self.cal2_idx.is_empty() {
            return Err(Error::SplitTooSmall("second calibration part must be non-empty".into()));
        }
        let mut seen = vec![false; n];
        for &i in self.train_idx.iter().chain(&self.cal1_idx).chain(&self.cal2_idx) {
            if i >= n {
                return Err(Error::InvalidData(format!("split index {i} out of range for {n} rows")));
            }
            if seen[i] {
                return Err(Error::InvalidData(format!("split index {i} repeated")));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Part sizes `floor(n * f)` for the two calibration parts; the remainder
/// goes to training.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "split fractions must be non-negative, got {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must sum to 1, got {total}"
        )));
    }
    let part = |f: f64| {
        let x = n as f64 * f;
        (x + x * 1e-12).floor() as usize
    };
    let cal1 = part(fractions[1]);
    let cal2 = part(fractions[2]);
    let train = n.saturating_sub(cal1 + cal2);
    let sizes = [train, cal1, cal2];
    for (size, frac) in sizes.iter().zip(fractions) {
        if frac > 0.0 && *size == 0 {
            return Err(Error::SplitTooSmall(format!(
                "{n} rows cannot fill fractions {fractions:?}"
            )));
        }
    }
    if train == 0 {
        return Err(Error::SplitTooSmall("empty training part".into()));
    }
    Ok(sizes)
}

/// Seeded Fisher–Yates permutation of `0..n`, cut into the given sizes.
pub fn make_split_sizes(n: usize, sizes: [usize; 3], seed: u64) -> Result<SplitPlan> {
    let used: usize = sizes.iter().sum();
    if used > n {
        return Err(Error::SplitTooSmall(format!(
            "requested {used} rows from a dataset of {n}"
        )));
    }
    if sizes[0] == 0 || sizes[1] == 0 {
        return Err(Error::SplitTooSmall(
            "training and calibration parts must be non-empty".into(),
        ));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded(seed, 0));
    let [a, b, c] = sizes;
    Ok(SplitPlan {
        train_idx: perm[..a].to_vec(),
        cal1_idx: perm[a..a + b].to_vec(),
        cal2_idx: perm[a + b..a + b + c].to_vec(),
        seed,
    })
}

/// Seeded split of `0..n` by fractions (train, cal1, cal2).
pub fn make_split(n: usize, fractions: [f64; 3], seed: u64) -> Result<SplitPlan> {
    let sizes = split_sizes(n, fractions)?;
    make_split_sizes(n, sizes, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn covered(plan: &SplitPlan) -> Vec<usize> {
        let mut all: Vec<usize> = plan
            .train_idx
            .iter()
            .chain(&plan.cal1_idx)
            .chain(&plan.cal2_idx)
            .copied()
            .collect();
        all.sort_unstable();
        all
    }

    #[test]
    fn remainder_goes_to_train() {
        let plan = make_split(10, [0.5, 0.25, 0.25], 1).unwrap();
        assert_eq!(plan.sizes(), [6, 2, 2]);
        assert_eq!(covered(&plan), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn empty_second_calibration() {
        let plan = make_split(4, [0.5, 0.5, 0.0], 7).unwrap();
        assert_eq!(plan.sizes(), [2, 2, 0]);
        assert!(plan.cal2_idx.is_empty());
    }

    #[test]
    fn deterministic() {
        let a = make_split(50, [0.5, 0.25, 0.25], 99).unwrap();
        let b = make_split(50, [0.5, 0.25, 0.25], 99).unwrap();
        assert_eq!(a, b);
        let c = make_split(50, [0.5, 0.25, 0.25], 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            make_split(2, [0.4, 0.3, 0.3], 0),
            Err(Error::SplitTooSmall(_))
        ));
        assert!(matches!(
            make_split(10, [0.5, 0.2, 0.2], 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn validate_catches_overlap() {
        let plan = SplitPlan {
            train_idx: vec![0, 1],
            cal1_idx: vec![1],
            cal2_idx: vec![],
            seed: 0,
        };
        assert!(plan.validate(3, false).is_err());
        assert!(SplitPlan::contiguous([2, 1, 0]).validate(3, false).is_ok());
        assert!(SplitPlan::contiguous([2, 1, 0]).validate(3, true).is_err());
    }

    proptest! {
        #[test]
        fn parts_are_disjoint(
            n in 3usize..400,
            a in 0.2f64..0.8,
            b in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let rest = 1.0 - a;
            let fractions = [a, rest * b, rest - rest * b];
            if let Ok(plan) = make_split(n, fractions, seed) {
                let all = covered(&plan);
                let mut dedup = all.clone();
                dedup.dedup();
                prop_assert_eq!(all.len(), dedup.len());
                prop_assert!(all.iter().all(|&i| i < n));
                prop_assert_eq!(all.len(), n);
            }
        }
    }
}
