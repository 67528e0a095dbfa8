//! Benchmark construction from a knowledge graph: subject ranking, answer
//! and alias collection, cardinality profiling and template expansion.

mod source;
mod sparql;

use serde::{Deserialize, Serialize};

pub use source::{rank_subjects, FixtureEntity, FixtureKg, KnowledgeSource, RankedSubject, SourceError, SubjectPage};
pub use sparql::{SparqlConfig, SparqlSource, DEFAULT_ENDPOINT};

use crate::cloze::{self, TemplateError};
use crate::dataset::{Dataset, QueryRecord};
use crate::manifest::Manifest;
use crate::seed::RunSeed;
use crate::types::{AnswerSet, EntityId, MutabilityClass, Pid, Query, Relation};

pub const DEFAULT_SUBJECT_LIMIT: usize = 1500;
pub const DEFAULT_TAU: f64 = 1.3;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{pid}: {source}")]
    Source {
        pid: Pid,
        #[source]
        source: SourceError,
    },
    #[error("{pid}: no queries survived ingestion (pass --allow-empty to keep going)")]
    EmptyRelation { pid: Pid },
    #[error("{pid}: cannot profile an empty sample")]
    EmptySample { pid: Pid },
    #[error("{pid}: {source}")]
    Template {
        pid: Pid,
        #[source]
        source: TemplateError,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    OneToOne,
    OneToMany,
}

impl Cardinality {
    /// The cardinality a mutability class implies.
    pub fn of(class: MutabilityClass) -> Self {
        match class {
            MutabilityClass::Immutable1 => Cardinality::OneToOne,
            _ => Cardinality::OneToMany,
        }
    }
}

/// Mutability is curated; cardinality only splits the immutable relations.
pub fn class_for(mutable: bool, cardinality: Cardinality) -> MutabilityClass {
    match (mutable, cardinality) {
        (true, _) => MutabilityClass::Mutable,
        (false, Cardinality::OneToOne) => MutabilityClass::Immutable1,
        (false, Cardinality::OneToMany) => MutabilityClass::ImmutableN,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityProfile {
    pub pid: Pid,
    pub sample_size: usize,
    pub mean_objects: f64,
    /// Population standard deviation.
    pub std_objects: f64,
}

/// Mean and population std of per-subject object counts.
pub fn profile_counts(pid: &Pid, counts: &[usize]) -> Result<CardinalityProfile, IngestError> {
    if counts.is_empty() {
        return Err(IngestError::EmptySample { pid: pid.clone() });
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
    Ok(CardinalityProfile {
        pid: pid.clone(),
        sample_size: counts.len(),
        mean_objects: mean,
        std_objects: var.sqrt(),
    })
}

/// Profiles `pid` by querying the distinct objects of every given subject.
pub fn profile_relation(
    source: &dyn KnowledgeSource,
    pid: &Pid,
    subjects: &[EntityId],
) -> Result<CardinalityProfile, IngestError> {
    let mut counts = Vec::with_capacity(subjects.len());
    for s in subjects {
        let objs = source.objects(s, pid).map_err(|e| IngestError::Source {
            pid: pid.clone(),
            source: e,
        })?;
        if !objs.is_empty() {
            counts.push(objs.len());
        }
    }
    profile_counts(pid, &counts)
}

/// One-to-one iff the mean object count is at most `tau`.
pub fn classify_cardinality(profile: &CardinalityProfile, tau: f64) -> Cardinality {
    if profile.mean_objects <= tau {
        Cardinality::OneToOne
    } else {
        Cardinality::OneToMany
    }
}

/// Generation prompts for all templates of `relation`.
pub fn expand_templates(relation: &Relation, subject_label: &str) -> Result<Vec<String>, IngestError> {
    relation
        .templates
        .iter()
        .map(|t| {
            cloze::prompt(t, subject_label).map_err(|e| IngestError::Template {
                pid: relation.pid.clone(),
                source: e,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub sparql: SparqlConfig,
    pub subject_limit: usize,
    pub tau: f64,
    pub seed: u64,
    pub workers: usize,
    pub allow_empty: bool,
    /// Profile on a seeded sample of this many subjects instead of all
    /// retained ones.
    pub profile_sample: Option<usize>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            sparql: SparqlConfig::default(),
            subject_limit: DEFAULT_SUBJECT_LIMIT,
            tau: DEFAULT_TAU,
            seed: 0,
            workers: 4,
            allow_empty: false,
            profile_sample: None,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.subject_limit < 1 {
            return Err(IngestError::Config("subject limit must be at least 1".into()));
        }
        if self.tau.is_nan() || self.tau <= 1.0 {
            return Err(IngestError::Config(format!("tau must exceed 1, got {}", self.tau)));
        }
        if self.workers < 1 {
            return Err(IngestError::Config("need at least one worker".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationBuild {
    pub pid: Pid,
    pub label: String,
    pub mutability: MutabilityClass,
    pub subjects_listed: usize,
    pub queries: usize,
    pub skipped_no_objects: usize,
    pub profile: Option<CardinalityProfile>,
    pub cardinality: Option<Cardinality>,
    /// Whether the measured cardinality matches the manifest class.
    pub consistent: Option<bool>,
    pub reference_mean: f64,
    pub reference_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub tau: f64,
    pub relations: Vec<RelationBuild>,
    pub warnings: Vec<String>,
}

impl BuildReport {
    pub fn total_queries(&self) -> usize {
        self.relations.iter().map(|r| r.queries).sum()
    }

    /// Aligned text with the relation inventory columns.
    pub fn render(&self) -> String {
        let mut rows = vec![[
            "PID".to_string(),
            "Relation".to_string(),
            "Class".to_string(),
            "#Q".to_string(),
            "#O mean (std)".to_string(),
            "Reference".to_string(),
            "Skipped".to_string(),
        ]];
        for r in &self.relations {
            let measured = r
                .profile
                .as_ref()
                .map(|p| format!("{:.2} ({:.2})", p.mean_objects, p.std_objects))
                .unwrap_or_else(|| "-".into());
            let flag = if r.consistent == Some(false) { " !" } else { "" };
            rows.push([
                r.pid.to_string(),
                r.label.clone(),
                r.mutability.to_string(),
                r.queries.to_string(),
                format!("{measured}{flag}"),
                format!("{:.2} ({:.2})", r.reference_mean, r.reference_std),
                r.skipped_no_objects.to_string(),
            ]);
        }
        let mut out = crate::report::align(&rows);
        out.push_str(&format!("total queries: {}\n", self.total_queries()));
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

struct Job {
    relation: usize,
    subject: RankedSubject,
}

/// Builds a dataset from `source` for every relation in `manifest`.
///
/// Object lookups run on `config.workers` threads; results are merged by
/// (relation order, subject rank) so the output is independent of timing.
pub fn build_benchmark(
    config: &IngestConfig,
    manifest: &Manifest,
    source: &dyn KnowledgeSource,
) -> Result<(Dataset, BuildReport), IngestError> {
    config.validate()?;
    for r in &manifest.relations {
        for t in &r.templates {
            cloze::prompt(t, "").map_err(|e| IngestError::Template {
                pid: r.pid.clone(),
                source: e,
            })?;
        }
    }

    let mut warnings = Vec::new();
    let mut jobs = Vec::new();
    let mut listed = vec![0usize; manifest.relations.len()];
    for (ri, r) in manifest.relations.iter().enumerate() {
        let page = source
            .popular_subjects(&r.pid, config.subject_limit)
            .map_err(|e| IngestError::Source {
                pid: r.pid.clone(),
                source: e,
            })?;
        for w in &page.warnings {
            tracing::warn!("{w}");
        }
        warnings.extend(page.warnings);
        listed[ri] = page.subjects.len();
        jobs.extend(page.subjects.into_iter().map(|subject| Job { relation: ri, subject }));
    }

    let results = crate::net::parallel_map(config.workers, &jobs, |job| {
        let pid = &manifest.relations[job.relation].pid;
        source.objects(&job.subject.id, pid).map_err(|e| IngestError::Source {
            pid: pid.clone(),
            source: e,
        })
    })?;

    let seed = RunSeed(config.seed);
    let mut relations = Vec::new();
    let mut queries = Vec::new();
    let mut builds = Vec::new();
    let mut at = 0;
    for (ri, r) in manifest.relations.iter().enumerate() {
        let mut counts = Vec::new();
        let mut skipped = 0;
        let mut made = 0;
        for (job, objects) in jobs[at..at + listed[ri]].iter().zip(&results[at..at + listed[ri]]) {
            if objects.is_empty() {
                tracing::info!(pid = %r.pid, subject = %job.subject.id, "no objects, skipped");
                skipped += 1;
                continue;
            }
            counts.push(objects.len());
            let query = Query {
                query_id: Query::make_id(&r.pid, &job.subject.id),
                subject_id: job.subject.id.clone(),
                subject_label: job.subject.label.clone(),
                relation_pid: r.pid.clone(),
                frequency: job.subject.sitelinks,
            };
            queries.push(QueryRecord {
                query,
                answers: AnswerSet::merged(objects.iter().cloned()),
            });
            made += 1;
        }
        at += listed[ri];
        if made == 0 && !config.allow_empty {
            return Err(IngestError::EmptyRelation { pid: r.pid.clone() });
        }
        let sample = sample_counts(&counts, config.profile_sample, seed.child(r.pid.as_str()));
        let profile = profile_counts(&r.pid, &sample).ok();
        let cardinality = profile.as_ref().map(|p| classify_cardinality(p, config.tau));
        let consistent = cardinality.map(|c| c == Cardinality::of(r.mutability));
        if consistent == Some(false) {
            let msg = format!(
                "{}: measured cardinality {:?} disagrees with class {}",
                r.pid,
                cardinality.unwrap(),
                r.mutability
            );
            tracing::warn!("{msg}");
            warnings.push(msg);
        }
        let mut rel = r.clone();
        if let Some(p) = &profile {
            rel.mean_objects = p.mean_objects;
            rel.std_objects = p.std_objects;
        }
        relations.push(rel);
        builds.push(RelationBuild {
            pid: r.pid.clone(),
            label: r.label.clone(),
            mutability: r.mutability,
            subjects_listed: listed[ri],
            queries: made,
            skipped_no_objects: skipped,
            profile,
            cardinality,
            consistent,
            reference_mean: r.mean_objects,
            reference_std: r.std_objects,
        });
    }
    let report = BuildReport {
        tau: config.tau,
        relations: builds,
        warnings,
    };
    Ok((Dataset::new(relations, queries), report))
}

fn sample_counts(counts: &[usize], sample: Option<usize>, seed: RunSeed) -> Vec<usize> {
    match sample {
        Some(k) if k < counts.len() => {
            let mut idx = rand::seq::index::sample(&mut seed.rng("profile"), counts.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| counts[i]).collect()
        }
        _ => counts.to_vec(),
    }
}
