use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Example, ProbeError};
use crate::dataset::Dataset;
use crate::seed::RunSeed;
use crate::types::{EntityId, MutabilityClass, MutabilityLabel, Pid, RepresentationRecord, TEMPLATES_PER_RELATION};

/// Which immutable class is probed against the mutable relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProbeTask {
    #[serde(rename = "imm1")]
    Imm1,
    #[serde(rename = "immN")]
    ImmN,
}

impl ProbeTask {
    pub fn classes(self) -> [MutabilityClass; 2] {
        match self {
            ProbeTask::Imm1 => [MutabilityClass::Immutable1, MutabilityClass::Mutable],
            ProbeTask::ImmN => [MutabilityClass::ImmutableN, MutabilityClass::Mutable],
        }
    }

    pub fn includes(self, class: MutabilityClass) -> bool {
        self.classes().contains(&class)
    }

    /// The reference train/validation relations; the rest are test.
    pub fn default_split(self) -> SplitSpec {
        let pids = |v: &[&str]| v.iter().map(|p| Pid::new(*p)).collect::<Vec<_>>();
        let (train_imm, val_imm): (&[&str], &[&str]) = match self {
            ProbeTask::Imm1 => (&["P103", "P19", "P159"], &["P20", "P364"]),
            ProbeTask::ImmN => (&["P27", "P1412", "P190"], &["P69", "P101"]),
        };
        let mut train = pids(train_imm);
        train.extend(pids(&["P937", "P286", "P6"]));
        let mut val = pids(val_imm);
        val.extend(pids(&["P108", "P488"]));
        SplitSpec { train, val }
    }
}

impl fmt::Display for ProbeTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeTask::Imm1 => "imm1",
            ProbeTask::ImmN => "immN",
        })
    }
}

impl FromStr for ProbeTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "imm1" | "Imm1" | "immutable_1" => Ok(ProbeTask::Imm1),
            "immN" | "immn" | "ImmN" | "immutable_n" => Ok(ProbeTask::ImmN),
            _ => Err(format!("unknown probe task {s:?} (expected imm1 or immN)")),
        }
    }
}

/// Train and validation relations; the task's remaining relations are test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<Pid>,
    pub val: Vec<Pid>,
}

/// One verbalized triple selected for probing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitItem {
    pub query_id: String,
    pub relation: Pid,
    pub subject: EntityId,
    pub template_index: usize,
    pub object: String,
    pub label: MutabilityLabel,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSplits {
    pub task: ProbeTask,
    pub train: Vec<SplitItem>,
    pub val: Vec<SplitItem>,
    pub test: Vec<SplitItem>,
    pub test_relations: Vec<Pid>,
    /// Queries dropped because their subject already sits in an earlier split.
    pub dropped_val: usize,
    pub dropped_test: usize,
}

fn relations(items: &[SplitItem]) -> BTreeSet<&Pid> {
    items.iter().map(|i| &i.relation).collect()
}

fn subjects(items: &[SplitItem]) -> HashSet<&EntityId> {
    items.iter().map(|i| &i.subject).collect()
}

impl ProbeSplits {
    /// Relations shared by any two splits.
    pub fn relation_overlap(&self) -> BTreeSet<Pid> {
        let (a, b, c) = (relations(&self.train), relations(&self.val), relations(&self.test));
        a.intersection(&b)
            .chain(a.intersection(&c))
            .chain(b.intersection(&c))
            .map(|p| (*p).clone())
            .collect()
    }

    /// Subjects shared by any two splits.
    pub fn subject_overlap(&self) -> BTreeSet<EntityId> {
        let (a, b, c) = (subjects(&self.train), subjects(&self.val), subjects(&self.test));
        a.intersection(&b)
            .chain(a.intersection(&c))
            .chain(b.intersection(&c))
            .map(|s| (*s).clone())
            .collect()
    }

    pub fn check_hygiene(&self) -> Result<(), ProbeError> {
        let r = self.relation_overlap();
        if !r.is_empty() {
            return Err(ProbeError::Leak(format!("relations in several splits: {r:?}")));
        }
        let s = self.subject_overlap();
        if !s.is_empty() {
            return Err(ProbeError::Leak(format!("{} subjects in several splits", s.len())));
        }
        Ok(())
    }

    /// Every (query, template, object) triple that needs a representation.
    pub fn plan(&self) -> Vec<&SplitItem> {
        let mut seen = HashSet::new();
        self.train
            .iter()
            .chain(&self.val)
            .chain(&self.test)
            .filter(|i| seen.insert((&i.query_id, i.template_index, &i.object)))
            .collect()
    }
}

/// Builds relation-disjoint, subject-disjoint probing splits.
///
/// Train and validation keep one random template and one random object per
/// query; test keeps all templates with one random object. A subject is
/// kept only in the first split it reaches, in the order train, val, test.
pub fn make_splits(dataset: &Dataset, task: ProbeTask, spec: &SplitSpec, seed: RunSeed) -> Result<ProbeSplits, ProbeError> {
    let train_set: HashSet<&Pid> = spec.train.iter().collect();
    let val_set: HashSet<&Pid> = spec.val.iter().collect();
    if let Some(p) = train_set.intersection(&val_set).next() {
        return Err(ProbeError::Config(format!("{p} is listed as both train and validation")));
    }
    for p in spec.train.iter().chain(&spec.val) {
        match dataset.class_of(p) {
            None => return Err(ProbeError::Config(format!("{p} is not in the dataset"))),
            Some(c) if !task.includes(c) => {
                return Err(ProbeError::Config(format!("{p} ({c}) is not part of the {task} task")))
            }
            _ => {}
        }
    }
    let test_relations: Vec<Pid> = dataset
        .relations
        .iter()
        .filter(|r| task.includes(r.mutability) && !train_set.contains(&r.pid) && !val_set.contains(&r.pid))
        .map(|r| r.pid.clone())
        .collect();

    let mut rng = seed.rng("split");
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for qr in &dataset.queries {
        let q = &qr.query;
        let Some(class) = dataset.class_of(&q.relation_pid) else { continue };
        if !task.includes(class) {
            continue;
        }
        let object = qr.answers.answers[rng.random_range(0..qr.answers.len())].canonical.clone();
        let item = |template_index| SplitItem {
            query_id: q.query_id.clone(),
            relation: q.relation_pid.clone(),
            subject: q.subject_id.clone(),
            template_index,
            object: object.clone(),
            label: MutabilityLabel::of(class),
            frequency: q.frequency,
        };
        if train_set.contains(&q.relation_pid) {
            train.push(item(rng.random_range(0..TEMPLATES_PER_RELATION)));
        } else if val_set.contains(&q.relation_pid) {
            val.push(item(rng.random_range(0..TEMPLATES_PER_RELATION)));
        } else {
            test.extend((0..TEMPLATES_PER_RELATION).map(item));
        }
    }

    let train_subjects: HashSet<EntityId> = train.iter().map(|i| i.subject.clone()).collect();
    let before = val.len();
    val.retain(|i| !train_subjects.contains(&i.subject));
    let dropped_val = before - val.len();
    let val_subjects: HashSet<EntityId> = val.iter().map(|i| i.subject.clone()).collect();
    let before = test.len();
    test.retain(|i| !train_subjects.contains(&i.subject) && !val_subjects.contains(&i.subject));
    let dropped_test = (before - test.len()) / TEMPLATES_PER_RELATION;

    let splits = ProbeSplits {
        task,
        train,
        val,
        test,
        test_relations,
        dropped_val,
        dropped_test,
    };
    splits.check_hygiene()?;
    Ok(splits)
}

type RepKey<'a> = (&'a str, usize, &'a str);

/// Index of representations by (query, template, object).
pub struct RepresentationIndex<'a> {
    map: HashMap<RepKey<'a>, &'a RepresentationRecord>,
    dim: Option<usize>,
}

impl<'a> RepresentationIndex<'a> {
    pub fn new(records: &'a [RepresentationRecord]) -> Result<Self, ProbeError> {
        let dim = records.first().map(|r| r.vector.len());
        let mut map = HashMap::with_capacity(records.len());
        for r in records {
            if Some(r.vector.len()) != dim {
                return Err(ProbeError::Config(format!(
                    "{}: dimension {} differs from {}",
                    r.query_id,
                    r.vector.len(),
                    dim.unwrap_or(0)
                )));
            }
            map.insert((r.query_id.as_str(), r.template_index, r.object_used.as_str()), r);
        }
        Ok(RepresentationIndex { map, dim })
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// Examples for `items`, labelled by `label`.
    pub fn examples(&self, items: &[SplitItem], label: impl Fn(&SplitItem) -> usize) -> Result<Vec<Example>, ProbeError> {
        items
            .iter()
            .map(|i| {
                let rec = self
                    .map
                    .get(&(i.query_id.as_str(), i.template_index, i.object.as_str()))
                    .ok_or_else(|| ProbeError::MissingRepresentation {
                        query_id: i.query_id.clone(),
                        template_index: i.template_index,
                        object: i.object.clone(),
                    })?;
                Ok(Example {
                    x: rec.vector.clone(),
                    y: label(i),
                    relation: i.relation.clone(),
                    frequency: i.frequency,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_splits_are_disjoint_and_in_task() {
        for task in [ProbeTask::Imm1, ProbeTask::ImmN] {
            let s = task.default_split();
            assert_eq!(s.train.len(), 6);
            assert_eq!(s.val.len(), 4);
            let m = crate::manifest::Manifest::shipped();
            for p in s.train.iter().chain(&s.val) {
                assert!(task.includes(m.get(p.as_str()).unwrap().mutability), "{p}");
            }
        }
    }

    #[test]
    fn task_names() {
        assert_eq!("imm1".parse::<ProbeTask>().unwrap(), ProbeTask::Imm1);
        assert_eq!("immN".parse::<ProbeTask>().unwrap(), ProbeTask::ImmN);
        assert!("x".parse::<ProbeTask>().is_err());
        assert_eq!(ProbeTask::ImmN.to_string(), "immN");
    }
}
