use crate::audio::AudioStore;
use crate::corpus::{Corpus, HdmEvent};
use crate::detectors::{assemble_fewshot, Detector, DetectorError, WindowInput};
use crate::mocksvc::Registry;
use crate::rng::{derive_seed, rng_for};
use crate::timeline::{build_dataset, Dataset, ExampleSpec, TimelineError};
use crate::TOOL_VERSION;

use super::{
    f1_at_threshold, make_splits, pr_curve, select_threshold, EvalError, EvalReport, FoldResult,
    MccvConfig, ScoredExample, SkippedFold, SplitPlan,
};

/// Sampled train and test sets for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldData {
    pub plan: SplitPlan,
    pub train: Dataset,
    pub test: Dataset,
}

fn dataset_for(
    corpus: &Corpus,
    events: &[HdmEvent],
    ids: &[String],
    config: &MccvConfig,
    fold: usize,
    part: &str,
) -> Result<Dataset, TimelineError> {
    let sub = corpus.subset(ids);
    let sub_events: Vec<HdmEvent> = events
        .iter()
        .filter(|e| ids.contains(&e.conversation_id))
        .cloned()
        .collect();
    let seed = derive_seed(config.seed, &["fold", &fold.to_string(), part]);
    build_dataset(&sub, &sub_events, &config.sampling.with_seed(seed))
}

/// Split plans and their datasets. Sampling seeds derive from
/// `config.seed`, the fold index and the side of the split.
pub fn fold_datasets(corpus: &Corpus, events: &[HdmEvent], config: &MccvConfig) -> Result<Vec<FoldData>, EvalError> {
    config.validate()?;
    corpus.check_events(events).map_err(TimelineError::from)?;
    let plans = make_splits(&corpus.ids(), config.k, config.test_frac, config.seed)?;
    plans
        .into_iter()
        .map(|plan| {
            let f = plan.fold_index;
            let train = dataset_for(corpus, events, &plan.train_conversation_ids, config, f, "train")?;
            let test = dataset_for(corpus, events, &plan.test_conversation_ids, config, f, "test")?;
            Ok(FoldData { plan, train, test })
        })
        .collect()
}

/// Registry covering every window an evaluation with `config` will send.
pub fn mccv_registry(
    corpus: &Corpus,
    events: &[HdmEvent],
    store: &AudioStore,
    config: &MccvConfig,
) -> Result<Registry, EvalError> {
    let mut registry = Registry::new();
    for fd in fold_datasets(corpus, events, config)? {
        registry.register_examples(store, fd.train.examples.iter().chain(&fd.test.examples))?;
    }
    Ok(registry)
}

fn score_examples(detector: &Detector, store: &AudioStore, examples: &[ExampleSpec]) -> Result<Vec<f64>, EvalError> {
    let windows = examples
        .iter()
        .map(|e| {
            Ok(WindowInput::new(store.window(e)?, e.context_end_s).with_conversation(e.conversation_id.clone()))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    detector
        .score_windows(&windows)
        .into_iter()
        .map(|s| s.map(|s| s.value()))
        .collect::<Result<Vec<_>, DetectorError>>()
        .map_err(EvalError::from)
}

fn labels(examples: &[ExampleSpec]) -> Vec<bool> {
    examples.iter().map(|e| e.label.is_positive()).collect()
}

fn config_hash(corpus: &Corpus, events: &[HdmEvent], config: &MccvConfig) -> Result<String, EvalError> {
    let payload = serde_json::to_vec(&(corpus.content_hash(), events, config))?;
    Ok(crate::corpus::hex_digest(&payload))
}

/// Evaluate `detector` over `config.k` random conversation splits.
///
/// Each fold fits its threshold (and draws few-shot examples) on the
/// training side and reports F1 on the test side. Folds whose test side has
/// no positives are skipped and listed with the reason.
pub fn run_mccv(
    corpus: &Corpus,
    events: &[HdmEvent],
    store: &AudioStore,
    detector: &Detector,
    config: &MccvConfig,
) -> Result<EvalReport, EvalError> {
    let folds = fold_datasets(corpus, events, config)?;
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    let shots = detector.config().shots;
    for fd in &folds {
        let f = fd.plan.fold_index;
        let skip = |reason: &str| SkippedFold {
            fold_index: f,
            reason: reason.to_string(),
        };
        if fd.test.positive_count() == 0 {
            skipped.push(skip("test split has no positives"));
            continue;
        }
        if fd.train.positive_count() == 0 {
            skipped.push(skip("training split has no positives"));
            continue;
        }
        let mut fold_detector = detector.clone();
        if shots > 0 {
            let mut rng = rng_for(config.seed, &["fewshot", &f.to_string()]);
            let specs = assemble_fewshot(&fd.train.examples, shots, &mut rng)?;
            let content = fold_detector.prepare_fewshot(specs, store)?;
            fold_detector = fold_detector.with_fewshot(content);
        }
        let train_scores = score_examples(&fold_detector, store, &fd.train.examples)?;
        let threshold = select_threshold(&train_scores, &labels(&fd.train.examples))?;

        let test_labels = labels(&fd.test.examples);
        let test_scores = score_examples(&fold_detector, store, &fd.test.examples)?;
        let prf = f1_at_threshold(&test_scores, &test_labels, threshold)?;
        let curve = match pr_curve(&test_scores, &test_labels) {
            Ok(c) => c,
            Err(EvalError::SingleClass) => Vec::new(),
            Err(e) => return Err(e),
        };
        log::info!("fold {f}: threshold {threshold:.4} f1 {:.4}", prf.f1);
        results.push(FoldResult {
            fold_index: f,
            threshold,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            n_positive: fd.test.positive_count(),
            n_negative: fd.test.negative_count(),
            fewshot: shots,
            pr_curve: curve,
            examples: fd
                .test
                .examples
                .iter()
                .zip(&test_scores)
                .map(|(e, &score)| ScoredExample {
                    conversation_id: e.conversation_id.clone(),
                    t_s: e.t_s,
                    label: e.label,
                    score,
                })
                .collect(),
        });
    }
    if results.is_empty() {
        return Err(EvalError::AllFoldsSkipped);
    }
    let avg_f1 = results.iter().map(|r| r.f1).sum::<f64>() / results.len() as f64;
    let mut detector_config = detector.config().clone();
    detector_config.endpoint = None;
    Ok(EvalReport {
        tool_version: TOOL_VERSION.to_string(),
        detector: detector.kind().to_string(),
        detector_config,
        config: config.clone(),
        config_hash: config_hash(corpus, events, config)?,
        seed: config.seed,
        rho: config.rho(),
        splits: folds.into_iter().map(|fd| fd.plan).collect(),
        folds: results,
        skipped,
        avg_f1,
    })
}
