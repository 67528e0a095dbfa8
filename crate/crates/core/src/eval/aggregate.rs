use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::score::ScoreRecord;
use crate::dataset::Dataset;
use crate::types::{MutabilityClass, Pid, TEMPLATES_PER_RELATION};

/// How a query's five template scores reduce to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplatePolicy {
    /// Mean over the templates the query was scored with.
    #[default]
    Mean,
    /// Per relation, the template with the highest mean F1.
    BestTemplate,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("score record for unknown query {0}")]
    Orphan(String),
    #[error("prediction for unknown query {0}")]
    OrphanPrediction(String),
    #[error("query {query_id} has no template {template_index}")]
    MissingTemplate { query_id: String, template_index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    pub pid: Pid,
    pub label: String,
    pub class: MutabilityClass,
    pub queries: usize,
    pub mean_f1: f64,
    pub mean_confidence: f64,
    /// Template chosen under [`TemplatePolicy::BestTemplate`].
    pub best_template: usize,
    pub template_mean_f1: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: MutabilityClass,
    pub relations: usize,
    pub mean_f1: f64,
    pub mean_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub policy: TemplatePolicy,
    pub relations: Vec<RelationScore>,
    pub classes: Vec<ClassScore>,
    /// Macro average over all relations.
    pub macro_f1: f64,
    pub macro_confidence: f64,
    /// Dataset queries that had no score records at all.
    pub unscored_queries: usize,
}

impl AggregateReport {
    pub fn class(&self, c: MutabilityClass) -> Option<&ClassScore> {
        self.classes.iter().find(|s| s.class == c)
    }

    pub fn relation(&self, pid: &Pid) -> Option<&RelationScore> {
        self.relations.iter().find(|r| &r.pid == pid)
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Per-relation template with the highest mean F1 (ties go to the lower
/// index), keyed by relation.
pub fn best_templates(scores: &[ScoreRecord], dataset: &Dataset) -> Result<HashMap<Pid, usize>, EvalError> {
    let qidx = dataset.query_index();
    let mut sums: HashMap<Pid, [(f64, usize); TEMPLATES_PER_RELATION]> = HashMap::new();
    for s in scores {
        let q = qidx.get(s.query_id.as_str()).ok_or_else(|| EvalError::Orphan(s.query_id.clone()))?;
        let slot = sums
            .entry(q.query.relation_pid.clone())
            .or_insert([(0.0, 0); TEMPLATES_PER_RELATION]);
        if let Some(t) = slot.get_mut(s.template_index) {
            t.0 += s.f1;
            t.1 += 1;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(pid, t)| (pid, argmax_template(&t)))
        .collect())
}

fn argmax_template(t: &[(f64, usize); TEMPLATES_PER_RELATION]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, (sum, n)) in t.iter().enumerate() {
        if *n == 0 {
            continue;
        }
        let m = sum / *n as f64;
        if m > best_val {
            best_val = m;
            best = i;
        }
    }
    best
}

/// Per-relation means, class macro averages and the overall macro average.
pub fn aggregate(
    scores: &[ScoreRecord],
    dataset: &Dataset,
    policy: TemplatePolicy,
) -> Result<AggregateReport, EvalError> {
    let qidx = dataset.query_index();
    // query -> template -> (f1, conf)
    let mut by_query: HashMap<&str, BTreeMap<usize, (f64, f64)>> = HashMap::new();
    for s in scores {
        let (key, _) = qidx
            .get_key_value(s.query_id.as_str())
            .ok_or_else(|| EvalError::Orphan(s.query_id.clone()))?;
        by_query
            .entry(key)
            .or_default()
            .insert(s.template_index, (s.f1, s.confidence));
    }
    let best = best_templates(scores, dataset)?;

    let mut relations = Vec::new();
    let mut unscored = 0usize;
    for rel in &dataset.relations {
        let best_t = best.get(&rel.pid).copied().unwrap_or(0);
        let mut f1s = Vec::new();
        let mut confs = Vec::new();
        let mut tsum = [(0.0, 0usize); TEMPLATES_PER_RELATION];
        for q in dataset.queries.iter().filter(|q| q.query.relation_pid == rel.pid) {
            let Some(per_t) = by_query.get(q.query.query_id.as_str()) else {
                unscored += 1;
                continue;
            };
            for (t, (f, _)) in per_t {
                if let Some(slot) = tsum.get_mut(*t) {
                    slot.0 += f;
                    slot.1 += 1;
                }
            }
            let picked = match policy {
                TemplatePolicy::Mean => {
                    (mean(per_t.values().map(|v| v.0)), mean(per_t.values().map(|v| v.1)))
                }
                TemplatePolicy::BestTemplate => match per_t.get(&best_t) {
                    Some((f, c)) => (Some(*f), Some(*c)),
                    None => (None, None),
                },
            };
            if let (Some(f), Some(c)) = picked {
                f1s.push(f);
                confs.push(c);
            }
        }
        if f1s.is_empty() {
            continue;
        }
        relations.push(RelationScore {
            pid: rel.pid.clone(),
            label: rel.label.clone(),
            class: rel.mutability,
            queries: f1s.len(),
            mean_f1: mean(f1s.iter().copied()).unwrap_or(0.0),
            mean_confidence: mean(confs.iter().copied()).unwrap_or(0.0),
            best_template: best_t,
            template_mean_f1: tsum
                .iter()
                .map(|(s, n)| (*n > 0).then(|| s / *n as f64))
                .collect(),
        });
    }

    let classes = MutabilityClass::ALL
        .iter()
        .filter_map(|c| {
            let members: Vec<&RelationScore> = relations.iter().filter(|r| r.class == *c).collect();
            Some(ClassScore {
                class: *c,
                relations: members.len(),
                mean_f1: mean(members.iter().map(|r| r.mean_f1))?,
                mean_confidence: mean(members.iter().map(|r| r.mean_confidence))?,
            })
        })
        .collect();

    Ok(AggregateReport {
        policy,
        macro_f1: mean(relations.iter().map(|r| r.mean_f1)).unwrap_or(0.0),
        macro_confidence: mean(relations.iter().map(|r| r.mean_confidence)).unwrap_or(0.0),
        relations,
        classes,
        unscored_queries: unscored,
    })
}

/// One row of the confidence-vs-F1 scatter: mean confidence of the records
/// whose F1 falls in the bucket, per class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub f1: f64,
    pub by_class: BTreeMap<MutabilityClass, Option<f64>>,
}

/// Buckets F1 to one decimal and averages confidence per class.
pub fn confidence_scatter(scores: &[ScoreRecord], dataset: &Dataset) -> Result<Vec<ScatterRow>, EvalError> {
    let qidx = dataset.query_index();
    let classes: HashMap<&Pid, MutabilityClass> =
        dataset.relations.iter().map(|r| (&r.pid, r.mutability)).collect();
    let mut acc: BTreeMap<(usize, MutabilityClass), (f64, usize)> = BTreeMap::new();
    for s in scores {
        let q = qidx.get(s.query_id.as_str()).ok_or_else(|| EvalError::Orphan(s.query_id.clone()))?;
        let Some(c) = classes.get(&q.query.relation_pid) else { continue };
        let bucket = (s.f1 * 10.0).round() as usize;
        let e = acc.entry((bucket, *c)).or_default();
        e.0 += s.confidence;
        e.1 += 1;
    }
    Ok((0..=10)
        .map(|b| ScatterRow {
            f1: b as f64 / 10.0,
            by_class: MutabilityClass::ALL
                .iter()
                .map(|c| (*c, acc.get(&(b, *c)).map(|(s, n)| s / *n as f64)))
                .collect(),
        })
        .collect())
}
