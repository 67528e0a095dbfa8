use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::jsonl::DataError;
use crate::types::{Answer, EntityId, Pid};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedSubject {
    pub id: EntityId,
    pub label: String,
    pub sitelinks: u64,
}

/// Subjects returned by a source together with any paging failures that
/// were given up on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubjectPage {
    pub subjects: Vec<RankedSubject>,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error("request failed after {attempts} attempts: {message}")]
    Exhausted { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Read access to a knowledge graph.
pub trait KnowledgeSource: Sync {
    /// Subjects having at least one object for `pid`, most linked first.
    fn popular_subjects(&self, pid: &Pid, limit: usize) -> Result<SubjectPage, SourceError>;

    /// Distinct objects of `(subject, pid)` with their aliases.
    fn objects(&self, subject: &EntityId, pid: &Pid) -> Result<Vec<Answer>, SourceError>;
}

/// Sorts by sitelinks descending, then id ascending, and keeps `limit`.
pub fn rank_subjects(mut subjects: Vec<RankedSubject>, limit: usize) -> Vec<RankedSubject> {
    subjects.sort_by(|a, b| b.sitelinks.cmp(&a.sitelinks).then_with(|| a.id.cmp(&b.id)));
    subjects.dedup_by(|a, b| a.id == b.id);
    subjects.truncate(limit);
    subjects
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntity {
    pub id: EntityId,
    pub label: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub sitelinks: u64,
}

/// A small file-backed triple store.
///
/// A fixture directory holds `entities.jsonl` (one [`FixtureEntity`] per
/// line, plain JSON) and `triples.tsv` (`subject<TAB>pid<TAB>object`, `#`
/// starts a comment).
#[derive(Debug, Clone, Default)]
pub struct FixtureKg {
    entities: HashMap<EntityId, FixtureEntity>,
    // pid -> subject -> objects in file order
    triples: BTreeMap<Pid, BTreeMap<EntityId, Vec<EntityId>>>,
}

impl FixtureKg {
    pub fn new(entities: Vec<FixtureEntity>, triples: Vec<(EntityId, Pid, EntityId)>) -> Self {
        let mut kg = FixtureKg {
            entities: entities.into_iter().map(|e| (e.id.clone(), e)).collect(),
            triples: BTreeMap::new(),
        };
        for (s, p, o) in triples {
            let objs = kg.triples.entry(p).or_default().entry(s).or_default();
            if !objs.contains(&o) {
                objs.push(o);
            }
        }
        kg
    }

    pub fn load(dir: &Path) -> Result<Self, DataError> {
        let epath = dir.join("entities.jsonl");
        let etext = std::fs::read_to_string(&epath).map_err(|e| DataError::io(&epath, e))?;
        let mut entities = Vec::new();
        for (i, line) in etext.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: FixtureEntity = serde_json::from_str(line).map_err(|e| DataError::Parse {
                path: epath.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
            entities.push(e);
        }
        let tpath = dir.join("triples.tsv");
        let ttext = std::fs::read_to_string(&tpath).map_err(|e| DataError::io(&tpath, e))?;
        let mut triples = Vec::new();
        for (i, line) in ttext.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(DataError::Parse {
                    path: tpath.clone(),
                    line: i + 1,
                    message: format!("expected 3 tab-separated fields, found {}", parts.len()),
                });
            }
            triples.push((EntityId::new(parts[0]), Pid::new(parts[1]), EntityId::new(parts[2])));
        }
        let kg = FixtureKg::new(entities, triples);
        let missing: BTreeSet<&EntityId> = kg
            .triples
            .values()
            .flat_map(|m| m.iter().flat_map(|(s, os)| std::iter::once(s).chain(os)))
            .filter(|id| !kg.entities.contains_key(*id))
            .collect();
        if let Some(id) = missing.into_iter().next() {
            return Err(DataError::Invalid(format!("{}: unknown entity {id}", tpath.display())));
        }
        Ok(kg)
    }

    fn entity(&self, id: &EntityId) -> Option<&FixtureEntity> {
        self.entities.get(id)
    }
}

impl KnowledgeSource for FixtureKg {
    fn popular_subjects(&self, pid: &Pid, limit: usize) -> Result<SubjectPage, SourceError> {
        let subjects = self
            .triples
            .get(pid)
            .map(|m| {
                m.keys()
                    .filter_map(|s| self.entity(s))
                    .map(|e| RankedSubject {
                        id: e.id.clone(),
                        label: e.label.clone(),
                        sitelinks: e.sitelinks,
                    })
                    .collect()
            })
            .unwrap_or_default();
        Ok(SubjectPage {
            subjects: rank_subjects(subjects, limit),
            warnings: Vec::new(),
        })
    }

    fn objects(&self, subject: &EntityId, pid: &Pid) -> Result<Vec<Answer>, SourceError> {
        let ids = self.triples.get(pid).and_then(|m| m.get(subject));
        Ok(ids
            .into_iter()
            .flatten()
            .filter_map(|o| self.entity(o))
            .map(|e| Answer::new(e.label.clone()).with_aliases(e.aliases.clone()))
            .collect())
    }
}
