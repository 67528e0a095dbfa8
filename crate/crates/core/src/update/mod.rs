//! In-context knowledge updates: pick facts the model reliably knows,
//! balance them across mutability classes, swap in a counterfactual object
//! and check whether the model follows the edit.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::cloze::{self, TemplateError};
use crate::dataset::Dataset;
use crate::eval::{best_templates, normalize, truncate_to_target, EvalError, ScoreRecord};
use crate::probe::frequency_bins;
use crate::seed::RunSeed;
use crate::types::{AnswerSet, MutabilityClass, Pid, TEMPLATES_PER_RELATION};

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.8;
pub const DEFAULT_PERCENTILES: usize = 10;
pub const REPORTED_PERCENTILES: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum UpdateError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no query was answered perfectly with confidence >= {threshold}; try a lower --conf-threshold")]
    EmptySelection { threshold: f64 },
    #[error("class {0} has no usable queries, cannot balance")]
    EmptyClass(MutabilityClass),
    #[error("{pid}: {source}")]
    Template {
        pid: Pid,
        #[source]
        source: TemplateError,
    },
    #[error("{pid}: needs at least two templates")]
    MissingTemplate { pid: Pid },
    #[error("no generation for case {0}")]
    MissingGeneration(String),
    #[error("generation for {query_id} was made from a different prompt")]
    PromptMismatch { query_id: String },
}

/// A query the model answers perfectly and confidently with its relation's
/// best template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Memorized {
    pub query_id: String,
    pub relation: Pid,
    pub class: MutabilityClass,
    pub template_index: usize,
    pub answer: String,
    pub frequency: u64,
}

/// Perfect, confident answers under the per-relation best template, in
/// score-file order.
pub fn select_memorized(
    scores: &[ScoreRecord],
    dataset: &Dataset,
    best: &HashMap<Pid, usize>,
    threshold: f64,
) -> Result<Vec<Memorized>, UpdateError> {
    let qidx = dataset.query_index();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for s in scores {
        let q = qidx.get(s.query_id.as_str()).ok_or_else(|| EvalError::Orphan(s.query_id.clone()))?;
        let pid = &q.query.relation_pid;
        if best.get(pid) != Some(&s.template_index) {
            continue;
        }
        if !(s.exact_match && s.f1 == 1.0 && s.confidence >= threshold) {
            continue;
        }
        if !seen.insert(s.query_id.as_str()) {
            continue;
        }
        let Some(class) = dataset.class_of(pid) else { continue };
        let answer = s
            .matched_answer
            .clone()
            .unwrap_or_else(|| q.answers.answers[0].canonical.clone());
        out.push(Memorized {
            query_id: s.query_id.clone(),
            relation: pid.clone(),
            class,
            template_index: s.template_index,
            answer,
            frequency: q.query.frequency,
        });
    }
    if out.is_empty() {
        return Err(UpdateError::EmptySelection { threshold });
    }
    Ok(out)
}

/// How many items each relation contributes so the total is `need` and the
/// counts are as even as capacity allows. Leftover units go round-robin
/// starting at `offset`.
pub fn allocate(capacity: &[usize], need: usize, offset: usize) -> Vec<usize> {
    let k = capacity.len();
    let mut take = vec![0usize; k];
    let mut left = need.min(capacity.iter().sum());
    while left > 0 {
        let open: Vec<usize> = (0..k).map(|i| (i + offset) % k).filter(|&i| take[i] < capacity[i]).collect();
        if open.len() <= left {
            for i in open {
                take[i] += 1;
                left -= 1;
            }
        } else {
            for &i in &open[..left] {
                take[i] += 1;
            }
            left = 0;
        }
    }
    take
}

/// Equal counts per class (the smallest class size), spread evenly over
/// each class's relations. Output keeps class order, then input order.
pub fn balance_sample(items: &[Memorized], seed: RunSeed) -> Result<Vec<Memorized>, UpdateError> {
    let mut by_class: BTreeMap<MutabilityClass, BTreeMap<&Pid, Vec<usize>>> = BTreeMap::new();
    for (i, m) in items.iter().enumerate() {
        by_class.entry(m.class).or_default().entry(&m.relation).or_default().push(i);
    }
    for c in MutabilityClass::ALL {
        if !by_class.contains_key(&c) {
            return Err(UpdateError::EmptyClass(c));
        }
    }
    let need = by_class
        .values()
        .map(|rels| rels.values().map(Vec::len).sum::<usize>())
        .min()
        .unwrap_or(0);
    let mut rng = seed.rng("balance");
    let mut keep = Vec::new();
    for rels in by_class.values() {
        let capacity: Vec<usize> = rels.values().map(Vec::len).collect();
        let offset = rng.random_range(0..capacity.len());
        let take = allocate(&capacity, need, offset);
        let mut chosen = Vec::new();
        for (members, n) in rels.values().zip(take) {
            let picks = rand::seq::index::sample(&mut rng, members.len(), n);
            chosen.extend(picks.iter().map(|j| members[j]));
        }
        chosen.sort_unstable();
        keep.extend(chosen.into_iter().map(|i| items[i].clone()));
    }
    Ok(keep)
}

/// Pool entries that match no gold surface form of the query, deduplicated
/// by normalized form.
pub fn admissible<'a>(pool: &'a [String], gold: &AnswerSet) -> Vec<&'a String> {
    let forbidden: HashSet<Vec<String>> = gold.iter().flat_map(|a| a.surface_forms()).map(normalize).collect();
    let mut seen = HashSet::new();
    pool.iter()
        .filter(|o| {
            let key = normalize(o);
            !key.is_empty() && !forbidden.contains(&key) && seen.insert(key)
        })
        .collect()
}

/// Uniform draw from the admissible part of `pool`; `None` if nothing is left.
pub fn sample_new_object(gold: &AnswerSet, pool: &[String], rng: &mut crate::seed::Rng) -> Option<String> {
    admissible(pool, gold).choose(rng).map(|s| (*s).clone())
}

/// Objects the model got right, per relation, in first-seen order.
pub fn correct_object_pools(scores: &[ScoreRecord], dataset: &Dataset) -> Result<BTreeMap<Pid, Vec<String>>, UpdateError> {
    let qidx = dataset.query_index();
    let mut pools: BTreeMap<Pid, Vec<String>> = BTreeMap::new();
    for s in scores {
        let q = qidx.get(s.query_id.as_str()).ok_or_else(|| EvalError::Orphan(s.query_id.clone()))?;
        if let (true, Some(a)) = (s.exact_match, &s.matched_answer) {
            let pool = pools.entry(q.query.relation_pid.clone()).or_default();
            if !pool.contains(a) {
                pool.push(a.clone());
            }
        }
    }
    Ok(pools)
}

/// `Imagine that <update>. Then, <query>` with the update template fully
/// filled and the query template cut before its object slot.
pub fn build_update_prompt(
    update_template: &str,
    query_template: &str,
    subject: &str,
    new_object: &str,
) -> Result<String, TemplateError> {
    let fact = cloze::fill(update_template, subject, new_object)?;
    let fact = fact.trim_end().trim_end_matches('.').trim_end();
    let query = cloze::prompt(query_template, subject)?;
    Ok(format!("Imagine that {fact}. Then, {query}"))
}

/// The generation starts with the new object, up to normalization.
pub fn judge_update(generation: &str, new_object: &str) -> bool {
    let target = normalize(new_object);
    let pred = normalize(generation);
    truncate_to_target(&pred, &target) == target.as_slice()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateCase {
    pub query_id: String,
    pub relation: Pid,
    pub class: MutabilityClass,
    pub subject_label: String,
    pub original_object: String,
    pub new_object: String,
    pub update_template_index: usize,
    pub query_template_index: usize,
    pub prompt: String,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseBuild {
    pub cases: Vec<UpdateCase>,
    /// Memorized queries left out because every candidate object was gold.
    pub dropped: Vec<String>,
    pub memorized: usize,
}

/// Selects, balances and instantiates update cases.
pub fn build_cases(
    dataset: &Dataset,
    scores: &[ScoreRecord],
    threshold: f64,
    seed: RunSeed,
) -> Result<CaseBuild, UpdateError> {
    let best = best_templates(scores, dataset)?;
    let memorized = select_memorized(scores, dataset, &best, threshold)?;
    let pools = correct_object_pools(scores, dataset)?;
    let qidx = dataset.query_index();
    let empty = Vec::new();

    let mut dropped = Vec::new();
    let usable: Vec<Memorized> = memorized
        .iter()
        .filter(|m| {
            let pool = pools.get(&m.relation).unwrap_or(&empty);
            let ok = !admissible(pool, &qidx[m.query_id.as_str()].answers).is_empty();
            if !ok {
                tracing::info!(query = %m.query_id, "no admissible new object, dropped");
                dropped.push(m.query_id.clone());
            }
            ok
        })
        .cloned()
        .collect();
    let balanced = balance_sample(&usable, seed)?;

    let rels = dataset.relation_index();
    let mut rng = seed.rng("sampling");
    let mut cases = Vec::with_capacity(balanced.len());
    for m in balanced {
        let q = qidx[m.query_id.as_str()];
        let rel = rels[&m.relation];
        let new_object = sample_new_object(&q.answers, pools.get(&m.relation).unwrap_or(&empty), &mut rng)
            .expect("usable queries have an admissible object");
        let others: Vec<usize> = (0..TEMPLATES_PER_RELATION.min(rel.templates.len()))
            .filter(|&t| t != m.template_index)
            .collect();
        let &update_t = others
            .choose(&mut rng)
            .ok_or_else(|| UpdateError::MissingTemplate { pid: m.relation.clone() })?;
        let prompt = build_update_prompt(
            &rel.templates[update_t],
            &rel.templates[m.template_index],
            &q.query.subject_label,
            &new_object,
        )
        .map_err(|e| UpdateError::Template {
            pid: m.relation.clone(),
            source: e,
        })?;
        cases.push(UpdateCase {
            query_id: m.query_id,
            relation: m.relation,
            class: m.class,
            subject_label: q.query.subject_label.clone(),
            original_object: m.answer,
            new_object,
            update_template_index: update_t,
            query_template_index: m.template_index,
            prompt,
            frequency: m.frequency,
        });
    }
    Ok(CaseBuild {
        cases,
        dropped,
        memorized: memorized.len(),
    })
}

/// A model's answer to one update prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateGeneration {
    pub query_id: String,
    pub prompt: String,
    pub generation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateResult {
    #[serde(flatten)]
    pub case: UpdateCase,
    pub generation: String,
    pub success: bool,
}

/// Joins generations to cases by query id and judges each one.
pub fn judge_cases(cases: &[UpdateCase], generations: &[UpdateGeneration]) -> Result<Vec<UpdateResult>, UpdateError> {
    let by_id: HashMap<&str, &UpdateGeneration> = generations.iter().map(|g| (g.query_id.as_str(), g)).collect();
    cases
        .iter()
        .map(|c| {
            let g = by_id
                .get(c.query_id.as_str())
                .ok_or_else(|| UpdateError::MissingGeneration(c.query_id.clone()))?;
            if g.prompt != c.prompt {
                return Err(UpdateError::PromptMismatch {
                    query_id: c.query_id.clone(),
                });
            }
            Ok(UpdateResult {
                case: c.clone(),
                generation: g.generation.clone(),
                success: judge_update(&g.generation, &c.new_object),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassUpdate {
    pub class: MutabilityClass,
    pub cases: usize,
    pub successes: usize,
    pub rate: f64,
    /// Success rate per frequency percentile, lowest first; `None` where a
    /// percentile holds no case of this class.
    pub percentiles: Vec<Option<f64>>,
}

impl ClassUpdate {
    /// The `n` highest percentiles, highest first.
    pub fn top_percentiles(&self, n: usize) -> Vec<Option<f64>> {
        self.percentiles.iter().rev().take(n).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub classes: Vec<ClassUpdate>,
    pub percentiles: usize,
}

/// Success per class and per (class, frequency percentile). Percentiles are
/// taken over the whole balanced sample.
pub fn frequency_breakdown(results: &[UpdateResult], percentiles: usize) -> UpdateReport {
    let freqs: Vec<u64> = results.iter().map(|r| r.case.frequency).collect();
    let bins = if results.is_empty() {
        Vec::new()
    } else {
        frequency_bins(&freqs, percentiles)
    };
    let classes = MutabilityClass::ALL
        .iter()
        .map(|&class| {
            let mut per_bin = vec![(0usize, 0usize); percentiles];
            let (mut n, mut ok) = (0, 0);
            for (r, &b) in results.iter().zip(&bins) {
                if r.case.class != class {
                    continue;
                }
                n += 1;
                ok += r.success as usize;
                per_bin[b].0 += r.success as usize;
                per_bin[b].1 += 1;
            }
            ClassUpdate {
                class,
                cases: n,
                successes: ok,
                rate: if n == 0 { 0.0 } else { ok as f64 / n as f64 },
                percentiles: per_bin
                    .into_iter()
                    .map(|(s, c)| (c > 0).then(|| s as f64 / c as f64))
                    .collect(),
            }
        })
        .collect();
    UpdateReport { classes, percentiles }
}
