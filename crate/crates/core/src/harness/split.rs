//! Train/test splits over the periods of a history.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::demandset::DemandHistory;

/// Period indices `(train, test)`, each in ascending order.
pub type SplitIndices = (Vec<usize>, Vec<usize>);

pub fn random_split_indices(n_periods: usize, test_frac: f64, seed: u64) -> Result<SplitIndices, HarnessError> {
    if !(0.0..1.0).contains(&test_frac) {
        return Err(HarnessError::InvalidSplit(format!(
            "test fraction {test_frac} outside [0, 1)"
        )));
    }
    let n_test = (test_frac * n_periods as f64).round() as usize;
    if n_test >= n_periods {
        return Err(HarnessError::InvalidSplit(format!(
            "{n_test} test periods leave nothing to train on"
        )));
    }
    let mut order: Vec<usize> = (0..n_periods).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Highest-aggregate periods go to the test set; ties go to the earlier period.
pub fn worst_case_split_indices(history: &DemandHistory, n_test: usize) -> Result<SplitIndices, HarnessError> {
    let n = history.len();
    if n_test >= n {
        return Err(HarnessError::InvalidSplit(format!(
            "n_test = {n_test} must be below the history length {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| history.aggregate(b).total_cmp(&history.aggregate(a)).then(a.cmp(&b)));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn worst_case_split(
    history: &DemandHistory,
    n_test: usize,
) -> Result<(DemandHistory, DemandHistory), HarnessError> {
    let (train, test) = worst_case_split_indices(history, n_test)?;
    Ok((history.subset(&train), history.subset(&test)))
}

pub fn random_split(
    history: &DemandHistory,
    test_frac: f64,
    seed: u64,
) -> Result<(DemandHistory, DemandHistory), HarnessError> {
    let (train, test) = random_split_indices(history.len(), test_frac, seed)?;
    Ok((history.subset(&train), history.subset(&test)))
}
