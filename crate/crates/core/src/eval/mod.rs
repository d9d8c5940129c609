//! Monte Carlo cross-validation over conversations, F1/PR metrics and the
//! corrected resampled t-test for comparing detectors.

mod mccv;
mod metrics;
mod splits;
mod ttest;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioError;
use crate::detectors::{DetectorConfig, DetectorError};
use crate::mocksvc::MockError;
use crate::timeline::{Label, SamplingConfig, TimelineError};

pub use mccv::{fold_datasets, mccv_registry, run_mccv, FoldData};
pub use metrics::{f1_at_threshold, pr_curve, select_threshold, PrPoint, Prf};
pub use splits::{make_splits, test_size, SplitPlan};
pub use ttest::{beta_inc, ln_gamma, nb_ttest, student_t_sf, TTestResult};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty input")]
    EmptyInput,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("every fold was skipped")]
    AllFoldsSkipped,
    #[error("reports are not comparable: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Mock(#[from] MockError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccvConfig {
    pub k: usize,
    pub test_frac: f64,
    pub sampling: SamplingConfig,
    pub seed: u64,
}

impl Default for MccvConfig {
    fn default() -> Self {
        Self {
            k: 5,
            test_frac: 0.2,
            sampling: SamplingConfig::default(),
            seed: 0,
        }
    }
}

impl MccvConfig {
    /// Test-to-train size ratio used to correct the variance.
    pub fn rho(&self) -> f64 {
        self.test_frac / (1.0 - self.test_frac)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.k < 2 {
            return Err(EvalError::InvalidInput(format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return Err(EvalError::InvalidInput(format!("test_frac {} outside (0, 1)", self.test_frac)));
        }
        self.sampling.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub conversation_id: String,
    pub t_s: f64,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_index: usize,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    pub fewshot: usize,
    pub pr_curve: Vec<PrPoint>,
    pub examples: Vec<ScoredExample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub fold_index: usize,
    pub reason: String,
}

/// Everything needed to reproduce and compare one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub detector: String,
    /// Detector settings with the endpoint removed.
    pub detector_config: DetectorConfig,
    pub config: MccvConfig,
    /// Hash of the corpus, events and evaluation config; reports compare
    /// only when these match.
    pub config_hash: String,
    pub seed: u64,
    pub rho: f64,
    pub splits: Vec<SplitPlan>,
    pub folds: Vec<FoldResult>,
    pub skipped: Vec<SkippedFold>,
    pub avg_f1: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, EvalError> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

/// Test whether `a` beats `b` on the folds both evaluated.
pub fn compare(a: &EvalReport, b: &EvalReport) -> Result<TTestResult, EvalError> {
    if a.config_hash != b.config_hash {
        return Err(EvalError::Mismatch(format!(
            "config hash {} vs {}",
            a.config_hash, b.config_hash
        )));
    }
    if a.splits != b.splits {
        return Err(EvalError::Mismatch("split plans differ".into()));
    }
    let diffs: Vec<f64> = a
        .folds
        .iter()
        .filter_map(|fa| {
            b.folds
                .iter()
                .find(|fb| fb.fold_index == fa.fold_index)
                .map(|fb| fa.f1 - fb.f1)
        })
        .collect();
    if diffs.len() < 2 {
        return Err(EvalError::Mismatch(format!("only {} folds in common", diffs.len())));
    }
    nb_ttest(&diffs, a.rho)
}
