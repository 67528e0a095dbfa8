//! Domain vocabulary shared by every stage of the pipeline.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Placeholder for the subject inside a cloze template.
pub const SUBJECT_SLOT: &str = "[X]";
/// Placeholder for the object inside a cloze template.
pub const OBJECT_SLOT: &str = "[Y]";
/// Every relation carries exactly this many paraphrased templates.
pub const TEMPLATES_PER_RELATION: usize = 5;

/// Mutability class of a relation.
///
/// The derived ordering (`Immutable1 < ImmutableN < Mutable`) is the order
/// used for every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutabilityClass {
    #[serde(rename = "immutable_1")]
    Immutable1,
    #[serde(rename = "immutable_n")]
    ImmutableN,
    Mutable,
}

impl MutabilityClass {
    pub const ALL: [MutabilityClass; 3] = [
        MutabilityClass::Immutable1,
        MutabilityClass::ImmutableN,
        MutabilityClass::Mutable,
    ];

    pub fn is_mutable(self) -> bool {
        self == MutabilityClass::Mutable
    }

    /// Short column key used in CSV headers.
    pub fn key(self) -> &'static str {
        match self {
            MutabilityClass::Immutable1 => "immutable_1",
            MutabilityClass::ImmutableN => "immutable_n",
            MutabilityClass::Mutable => "mutable",
        }
    }
}

impl fmt::Display for MutabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MutabilityClass::Immutable1 => "Immutable-1",
            MutabilityClass::ImmutableN => "Immutable-N",
            MutabilityClass::Mutable => "Mutable",
        })
    }
}

/// Knowledge-graph predicate identifier, e.g. `P47`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pid(pub String);

impl Pid {
    pub fn new(s: impl Into<String>) -> Self {
        Pid(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Ord for Pid {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_id_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for Pid {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Entity identifier, e.g. `Q183`.
///
/// Ordered by letter prefix then numeric suffix, so `Q9 < Q10`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(s: impl Into<String>) -> Self {
        EntityId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Ord for EntityId {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_id_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for EntityId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn split_id(s: &str) -> (&str, Option<u64>) {
    let digits = s.trim_start_matches(|c: char| !c.is_ascii_digit());
    let prefix = &s[..s.len() - digits.len()];
    (prefix, digits.parse().ok())
}

fn natural_id_cmp(a: &str, b: &str) -> Ordering {
    match (split_id(a), split_id(b)) {
        ((pa, Some(na)), (pb, Some(nb))) => pa.cmp(pb).then(na.cmp(&nb)).then(a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// A knowledge-graph predicate with its mutability class, cardinality
/// profile and cloze templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub pid: Pid,
    pub label: String,
    pub mutability: MutabilityClass,
    pub templates: Vec<String>,
    pub mean_objects: f64,
    pub std_objects: f64,
}

impl Relation {
    /// Lists every invariant this relation breaks; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.templates.len() != TEMPLATES_PER_RELATION {
            out.push(format!(
                "templates length {} != {}",
                self.templates.len(),
                TEMPLATES_PER_RELATION
            ));
        }
        for (i, t) in self.templates.iter().enumerate() {
            let xs = t.matches(SUBJECT_SLOT).count();
            let ys = t.matches(OBJECT_SLOT).count();
            if xs != 1 {
                out.push(format!("template {i} has {xs} subject slots, expected 1"));
            }
            if ys != 1 {
                out.push(format!("template {i} has {ys} object slots, expected 1"));
            }
        }
        if self.mean_objects.is_nan() || self.mean_objects < 1.0 {
            out.push(format!("mean_objects {} < 1", self.mean_objects));
        }
        if self.std_objects.is_nan() || self.std_objects < 0.0 {
            out.push(format!("std_objects {} < 0", self.std_objects));
        }
        if self.pid.as_str().is_empty() {
            out.push("empty pid".to_string());
        }
        out
    }

    pub fn template(&self, index: usize) -> Option<&str> {
        self.templates.get(index).map(String::as_str)
    }
}

/// One subject-relation cloze instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub subject_id: EntityId,
    pub subject_label: String,
    pub relation_pid: Pid,
    /// Number of cross-language wiki pages for the subject.
    pub frequency: u64,
}

impl Query {
    pub fn make_id(pid: &Pid, subject: &EntityId) -> String {
        format!("{pid}:{subject}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub canonical: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl Answer {
    pub fn new(canonical: impl Into<String>) -> Self {
        Answer {
            canonical: canonical.into(),
            aliases: Vec::new(),
        }
    }

    pub fn with_aliases<I, S>(mut self, aliases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.aliases = aliases.into_iter().map(Into::into).collect();
        self
    }

    /// Canonical form followed by aliases.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

/// All gold objects of a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerSet {
    pub answers: Vec<Answer>,
}

impl AnswerSet {
    /// Builds a set, merging answers whose canonical forms normalize equal.
    /// The first canonical form wins; aliases are unioned in order.
    pub fn merged(answers: impl IntoIterator<Item = Answer>) -> Self {
        let mut out: Vec<Answer> = Vec::new();
        let mut keys: Vec<Vec<String>> = Vec::new();
        for a in answers {
            let key = crate::eval::normalize(&a.canonical);
            if let Some(pos) = keys.iter().position(|k| *k == key) {
                let target = &mut out[pos];
                let extra = std::iter::once(a.canonical).chain(a.aliases);
                for alias in extra {
                    if alias != target.canonical && !target.aliases.contains(&alias) {
                        target.aliases.push(alias);
                    }
                }
            } else {
                keys.push(key);
                out.push(a);
            }
        }
        AnswerSet { answers: out }
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Answer> {
        self.answers.iter()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.answers.is_empty() {
            out.push("empty answer set".to_string());
        }
        let mut seen: Vec<Vec<String>> = Vec::new();
        for a in &self.answers {
            if a.canonical.trim().is_empty() {
                out.push("empty canonical answer".to_string());
                continue;
            }
            let key = crate::eval::normalize(&a.canonical);
            if seen.contains(&key) {
                out.push(format!("duplicate canonical answer after normalization: {:?}", a.canonical));
            } else {
                seen.push(key);
            }
        }
        out
    }
}

/// A model's generation for one query under one template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub query_id: String,
    pub template_index: usize,
    pub prompt: String,
    pub generation: String,
    pub first_token_probability: f64,
}

impl PredictionRecord {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.template_index >= TEMPLATES_PER_RELATION {
            out.push(format!("template_index {} out of range 0..4", self.template_index));
        }
        let p = self.first_token_probability;
        if !(p > 0.0 && p <= 1.0) {
            out.push(format!("first_token_probability {p} outside (0, 1]"));
        }
        out
    }
}

/// Binary probing label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutabilityLabel {
    Immutable,
    Mutable,
}

impl MutabilityLabel {
    pub fn index(self) -> usize {
        match self {
            MutabilityLabel::Immutable => 0,
            MutabilityLabel::Mutable => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            MutabilityLabel::Immutable
        } else {
            MutabilityLabel::Mutable
        }
    }

    pub fn of(class: MutabilityClass) -> Self {
        if class.is_mutable() {
            MutabilityLabel::Mutable
        } else {
            MutabilityLabel::Immutable
        }
    }
}

/// Last-layer, last-token representation of one verbalized triple.
///
/// On disk the vector is hex-encoded little-endian `f32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationRecord {
    pub query_id: String,
    pub template_index: usize,
    pub object_used: String,
    #[serde(with = "crate::hexvec")]
    pub vector: Vec<f32>,
    pub label: MutabilityLabel,
}

impl RepresentationRecord {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.template_index >= TEMPLATES_PER_RELATION {
            out.push(format!("template_index {} out of range 0..4", self.template_index));
        }
        if self.vector.is_empty() {
            out.push("empty vector".to_string());
        }
        if let Some(i) = self.vector.iter().position(|v| !v.is_finite()) {
            out.push(format!("non-finite vector component at {i}"));
        }
        out
    }
}
