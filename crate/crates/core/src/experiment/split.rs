use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ExperimentError;

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Result<Self, ExperimentError> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(ExperimentError::InvalidSpec(format!(
                "test_fraction {test_fraction} not in (0, 1)"
            )));
        }
        Ok(Self { test_fraction, seed })
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { test_fraction: DEFAULT_TEST_FRACTION, seed: 0 }
    }
}

fn stratum_seed(seed: u64, stratum: i64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = seed ^ (stratum as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stratified holdout over row indices. Within each stratum `round(n * fraction)`
/// rows go to test, clamped to `[1, n - 1]` when `n >= 2`. Both index lists are
/// ascending.
pub fn split_indices(strata: &[i64], spec: &SplitSpec) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        groups.entry(*s).or_default().push(i);
    }
    let mut train = Vec::with_capacity(strata.len());
    let mut test = Vec::new();
    for (stratum, mut idx) in groups {
        let n = idx.len();
        let mut n_test = (n as f64 * spec.test_fraction).round() as usize;
        if n >= 2 {
            n_test = n_test.clamp(1, n - 1);
        } else {
            n_test = 0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(stratum_seed(spec.seed, stratum));
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Splits rows into `(train, test)`, stratified by `stratum`.
pub fn split<T: Clone>(rows: &[T], stratum: impl Fn(&T) -> i64, spec: &SplitSpec) -> (Vec<T>, Vec<T>) {
    let strata: Vec<i64> = rows.iter().map(stratum).collect();
    let (tr, te) = split_indices(&strata, spec);
    (
        tr.into_iter().map(|i| rows[i].clone()).collect(),
        te.into_iter().map(|i| rows[i].clone()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_rows_two_test() {
        let (tr, te) = split_indices(&[2015; 10], &SplitSpec::new(0.2, 7).unwrap());
        assert_eq!(te.len(), 2);
        assert_eq!(tr.len(), 8);
    }

    #[test]
    fn deterministic_disjoint_exhaustive() {
        let strata: Vec<i64> = (0..100).map(|i| 2011 + (i % 7)).collect();
        let spec = SplitSpec::new(0.2, 42).unwrap();
        let a = split_indices(&strata, &spec);
        assert_eq!(a, split_indices(&strata, &spec));
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        // every year on both sides
        for y in 2011..2018 {
            assert!(a.0.iter().any(|&i| strata[i] == y));
            assert!(a.1.iter().any(|&i| strata[i] == y));
        }
    }

    #[test]
    fn seeds_differ_on_fixed_fixture() {
        let strata = vec![2017; 100];
        let a = split_indices(&strata, &SplitSpec::new(0.2, 1).unwrap());
        let b = split_indices(&strata, &SplitSpec::new(0.2, 2).unwrap());
        assert_ne!(a.1, b.1);
    }

    #[test]
    fn fraction_bounds() {
        assert!(SplitSpec::new(0.0, 1).is_err());
        assert!(SplitSpec::new(1.0, 1).is_err());
        let (tr, te) = split_indices(&[1, 2, 2], &SplitSpec::new(0.01, 3).unwrap());
        assert_eq!(te.len(), 1);
        assert!(tr.contains(&0));
    }
}
