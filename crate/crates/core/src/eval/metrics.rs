use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(), EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if scores.len() != labels.len() {
        return Err(EvalError::InvalidInput(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::InvalidInput(format!("non-finite score {s}")));
    }
    Ok(())
}

fn prf(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = if tp + fp == 0 {
        if tp + fn_ == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

/// Scores at or above `threshold` count as positive predictions.
pub fn f1_at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Prf, EvalError> {
    check(scores, labels)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(prf(tp, fp, fn_))
}

/// Confusion counts at every distinct score, highest threshold first.
fn sweep(scores: &[f64], labels: &[bool]) -> Vec<(f64, usize, usize, usize)> {
    let total_pos = labels.iter().filter(|l| **l).count();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let thr = scores[order[i]];
        while i < order.len() && scores[order[i]] == thr {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((thr, tp, fp, total_pos - tp));
    }
    out
}

/// One point per distinct score, by descending threshold.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>, EvalError> {
    check(scores, labels)?;
    if labels.iter().all(|l| *l) || labels.iter().all(|l| !*l) {
        return Err(EvalError::SingleClass);
    }
    Ok(sweep(scores, labels)
        .into_iter()
        .map(|(threshold, tp, fp, fn_)| {
            let p = prf(tp, fp, fn_);
            PrPoint {
                precision: p.precision,
                recall: p.recall,
                threshold,
            }
        })
        .collect())
}

/// The distinct score with the highest F1; ties go to the larger score.
pub fn select_threshold(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check(scores, labels)?;
    let mut best: Option<(f64, f64)> = None;
    for (thr, tp, fp, fn_) in sweep(scores, labels) {
        let f1 = prf(tp, fp, fn_).f1;
        if best.is_none_or(|(_, b)| f1 > b) {
            best = Some((thr, f1));
        }
    }
    Ok(best.expect("non-empty input").0)
}
