//! Spelling-correction and classification metrics, all in percent.
//!
//! Word level counts positions; sentence level counts sentences. In both,
//! precision is over units the model edited and recall over units that
//! needed an edit. A ratio with an empty denominator is 0.

use alloc::format;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(hits: usize, predicted: usize, actual: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { 100.0 * n as f64 / d as f64 };
        let precision = ratio(hits, predicted);
        let recall = ratio(hits, actual);
        Self { precision, recall, f1: f1(precision, recall) }
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LevelMetrics {
    pub detection: Prf,
    pub correction: Prf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CorrectionMetrics {
    pub word: LevelMetrics,
    pub sentence: LevelMetrics,
}

#[derive(Default)]
struct Counts {
    predicted: usize,
    actual: usize,
    detected: usize,
    corrected: usize,
}

impl Counts {
    fn level(&self) -> LevelMetrics {
        LevelMetrics {
            detection: Prf::from_counts(self.detected, self.predicted, self.actual),
            correction: Prf::from_counts(self.corrected, self.predicted, self.actual),
        }
    }
}

/// Scores aligned (source, target, prediction) token sequences.
pub fn evaluate_correction<S: AsRef<[u32]>>(sources: &[S], targets: &[S], predictions: &[S]) -> Result<CorrectionMetrics> {
    if sources.len() != targets.len() || sources.len() != predictions.len() {
        return Err(Error::Invalid(format!(
            "{} sources, {} targets, {} predictions",
            sources.len(),
            targets.len(),
            predictions.len()
        )));
    }
    if sources.is_empty() {
        return Err(Error::Empty("correction evaluation set"));
    }
    let mut word = Counts::default();
    let mut sent = Counts::default();
    for (i, ((s, t), p)) in sources.iter().zip(targets).zip(predictions).enumerate() {
        let (s, t, p) = (s.as_ref(), t.as_ref(), p.as_ref());
        if s.len() != t.len() || s.len() != p.len() {
            return Err(Error::Invalid(format!("sentence {i}: lengths {}, {}, {}", s.len(), t.len(), p.len())));
        }
        let (mut edits, mut errors, mut same_set, mut all_right) = (0, 0, true, true);
        for ((&sv, &tv), &pv) in s.iter().zip(t).zip(p) {
            let edited = pv != sv;
            let wrong = tv != sv;
            edits += edited as usize;
            errors += wrong as usize;
            if edited && wrong {
                word.detected += 1;
                word.corrected += (pv == tv) as usize;
            }
            same_set &= edited == wrong;
            all_right &= !wrong || pv == tv;
        }
        word.predicted += edits;
        word.actual += errors;
        sent.predicted += (edits > 0) as usize;
        sent.actual += (errors > 0) as usize;
        if errors > 0 && same_set {
            sent.detected += 1;
            sent.corrected += all_right as usize;
        }
    }
    Ok(CorrectionMetrics { word: word.level(), sentence: sent.level() })
}

/// Classification accuracy in percent.
pub fn evaluate_classification(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Invalid(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::Empty("classification evaluation set"));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * correct as f64 / labels.len() as f64)
}
