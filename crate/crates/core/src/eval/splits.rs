use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng::rng_for;

/// One random train/test partition of conversations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub fold_index: usize,
    pub train_conversation_ids: Vec<String>,
    pub test_conversation_ids: Vec<String>,
    pub seed: u64,
}

/// Test-set size for `n` conversations, kept within `[1, n - 1]`.
pub fn test_size(n: usize, test_frac: f64) -> usize {
    ((test_frac * n as f64).round() as usize).clamp(1, n - 1)
}

/// `k` independent shuffles of the conversation ids, each cut into test and
/// train. Each plan's stream is keyed by `(seed, fold_index)`.
pub fn make_splits(
    conversation_ids: &[String],
    k: usize,
    test_frac: f64,
    seed: u64,
) -> Result<Vec<SplitPlan>, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidInput("k must be at least 1".into()));
    }
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(EvalError::InvalidInput(format!("test_frac {test_frac} outside (0, 1)")));
    }
    let mut ids = conversation_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != conversation_ids.len() {
        return Err(EvalError::InvalidInput("duplicate conversation ids".into()));
    }
    if ids.len() < 2 {
        return Err(EvalError::InvalidInput("need at least 2 conversations".into()));
    }
    let n_test = test_size(ids.len(), test_frac);
    Ok((0..k)
        .map(|fold| {
            let mut rng = rng_for(seed, &["split", &fold.to_string()]);
            let mut shuffled = ids.clone();
            shuffled.shuffle(&mut rng);
            let mut test = shuffled[..n_test].to_vec();
            let mut train = shuffled[n_test..].to_vec();
            test.sort();
            train.sort();
            SplitPlan {
                fold_index: fold,
                train_conversation_ids: train,
                test_conversation_ids: test,
                seed,
            }
        })
        .collect())
}
