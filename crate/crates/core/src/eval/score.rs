use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::normalize::{normalize, truncate_to_target};
use crate::types::AnswerSet;

/// Harmonic mean of precision and recall over the multiset token overlap.
/// Both empty scores 1; exactly one empty scores 0.
pub fn token_f1(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in gold {
        *counts.entry(g.as_str()).or_default() += 1;
    }
    let mut common = 0usize;
    for p in pred {
        if let Some(c) = counts.get_mut(p.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryScore {
    pub f1: f64,
    pub exact_match: bool,
    /// Canonical form of the answer that produced the best score.
    pub matched_answer: Option<String>,
}

/// Best F1 of a generation over every answer and alias.
///
/// The prediction is truncated separately for each candidate, to that
/// candidate's normalized length. Candidates that normalize to nothing
/// (e.g. a bare article) are skipped.
pub fn score_query(generation: &str, answers: &AnswerSet) -> QueryScore {
    let pred = normalize(generation);
    let mut best = QueryScore {
        f1: 0.0,
        exact_match: false,
        matched_answer: None,
    };
    for answer in answers.iter() {
        for form in answer.surface_forms() {
            let gold = normalize(form);
            if gold.is_empty() {
                continue;
            }
            let clipped = truncate_to_target(&pred, &gold);
            let f1 = token_f1(clipped, &gold);
            let exact = clipped == gold.as_slice();
            // exact beats a same-score reordering
            if f1 > best.f1 || (f1 == best.f1 && exact && !best.exact_match) {
                best = QueryScore {
                    f1,
                    exact_match: exact,
                    matched_answer: Some(answer.canonical.clone()),
                };
            }
        }
    }
    best
}

/// Scored prediction for one query under one template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub query_id: String,
    pub template_index: usize,
    pub f1: f64,
    pub confidence: f64,
    pub exact_match: bool,
    /// Canonical answer behind the best score, kept so later stages can
    /// reuse the model's correct predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_answer: Option<String>,
}

impl ScoreRecord {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.f1) {
            out.push(format!("f1 {} outside [0, 1]", self.f1));
        }
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            out.push(format!("confidence {} outside (0, 1]", self.confidence));
        }
        if self.exact_match && self.f1 != 1.0 {
            out.push("exact_match with f1 != 1".to_string());
        }
        out
    }
}
