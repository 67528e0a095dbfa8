//! Cloze scoring: normalization, per-candidate truncation, max-over-answers
//! token F1, and per-relation / per-class aggregation.

mod aggregate;
mod normalize;
mod score;

use rayon::prelude::*;

pub use aggregate::{
    aggregate, best_templates, confidence_scatter, AggregateReport, ClassScore, EvalError,
    RelationScore, ScatterRow, TemplatePolicy,
};
pub use normalize::{normalize, truncate_to_target};
pub use score::{score_query, token_f1, QueryScore, ScoreRecord};

use crate::dataset::Dataset;
use crate::types::{PredictionRecord, TEMPLATES_PER_RELATION};

/// Scores every prediction against its query's answers. Output order
/// follows input order; confidence is passed through untouched.
pub fn score_predictions(
    predictions: &[PredictionRecord],
    dataset: &Dataset,
) -> Result<Vec<ScoreRecord>, EvalError> {
    let qidx = dataset.query_index();
    predictions
        .par_iter()
        .map(|p| {
            let q = qidx
                .get(p.query_id.as_str())
                .ok_or_else(|| EvalError::OrphanPrediction(p.query_id.clone()))?;
            if p.template_index >= TEMPLATES_PER_RELATION {
                return Err(EvalError::MissingTemplate {
                    query_id: p.query_id.clone(),
                    template_index: p.template_index,
                });
            }
            let s = score_query(&p.generation, &q.answers);
            Ok(ScoreRecord {
                query_id: p.query_id.clone(),
                template_index: p.template_index,
                f1: s.f1,
                confidence: p.first_token_probability,
                exact_match: s.exact_match,
                matched_answer: s.matched_answer,
            })
        })
        .collect()
}
