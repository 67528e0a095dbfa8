//! On-disk dataset records and the dataset validator.
//!
//! A dataset file holds one record per line. Relation records come first,
//! followed by query records in relation order. Prediction and
//! representation files use the same envelope so a single validator can
//! check any of them.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::jsonl::{self, DataError};
use crate::types::{
    AnswerSet, MutabilityClass, Pid, PredictionRecord, Query, Relation, RepresentationRecord,
};

/// A query together with its gold answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    #[serde(flatten)]
    pub query: Query,
    pub answers: AnswerSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Relation(Relation),
    Query(QueryRecord),
    Prediction(PredictionRecord),
    Representation(RepresentationRecord),
}

/// An in-memory benchmark: relations plus their queries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub relations: Vec<Relation>,
    pub queries: Vec<QueryRecord>,
}

impl Dataset {
    pub fn new(relations: Vec<Relation>, queries: Vec<QueryRecord>) -> Self {
        Dataset { relations, queries }
    }

    pub fn relation(&self, pid: &Pid) -> Option<&Relation> {
        self.relations.iter().find(|r| &r.pid == pid)
    }

    pub fn relation_index(&self) -> HashMap<&Pid, &Relation> {
        self.relations.iter().map(|r| (&r.pid, r)).collect()
    }

    pub fn query_index(&self) -> HashMap<&str, &QueryRecord> {
        self.queries
            .iter()
            .map(|q| (q.query.query_id.as_str(), q))
            .collect()
    }

    pub fn class_of(&self, pid: &Pid) -> Option<MutabilityClass> {
        self.relation(pid).map(|r| r.mutability)
    }

    /// Number of queries per mutability class.
    pub fn class_counts(&self) -> BTreeMap<MutabilityClass, usize> {
        let classes: HashMap<&Pid, MutabilityClass> =
            self.relations.iter().map(|r| (&r.pid, r.mutability)).collect();
        let mut out: BTreeMap<MutabilityClass, usize> =
            MutabilityClass::ALL.iter().map(|c| (*c, 0)).collect();
        for q in &self.queries {
            if let Some(c) = classes.get(&q.query.relation_pid) {
                *out.entry(*c).or_default() += 1;
            }
        }
        out
    }

    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        self.relations
            .iter()
            .cloned()
            .map(Record::Relation)
            .chain(self.queries.iter().cloned().map(Record::Query))
    }

    pub fn to_jsonl(&self) -> String {
        let records: Vec<Record> = self.records().collect();
        jsonl::to_string(&records)
    }

    /// Parses dataset text. Fails on the first ill-formed line or on any
    /// record kind other than relation/query; use [`validate_str`] for a
    /// full violation report.
    pub fn from_jsonl(text: &str) -> Result<Self, DataError> {
        let mut ds = Dataset::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = jsonl::parse_line(line).map_err(|message| DataError::Parse {
                path: "<dataset>".into(),
                line: i + 1,
                message,
            })?;
            match rec {
                Record::Relation(r) => ds.relations.push(r),
                Record::Query(q) => ds.queries.push(q),
                other => {
                    return Err(DataError::Invalid(format!(
                        "line {}: unexpected {} record in dataset",
                        i + 1,
                        record_kind(&other)
                    )))
                }
            }
        }
        Ok(ds)
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        Dataset::from_jsonl(&text).map_err(|e| match e {
            DataError::Parse { line, message, .. } => DataError::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
        }
        std::fs::write(path, self.to_jsonl()).map_err(|e| DataError::io(path, e))
    }

    /// Reads a dataset and rejects it unless it validates cleanly.
    pub fn read_validated(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let report = validate_str(&text);
        if !report.passed() {
            return Err(DataError::Invalid(format!(
                "{}: {} validation violation(s); first: {}",
                path.display(),
                report.violations.len(),
                report.violations[0]
            )));
        }
        Dataset::from_jsonl(&text)
    }
}

fn record_kind(r: &Record) -> &'static str {
    match r {
        Record::Relation(_) => "relation",
        Record::Query(_) => "query",
        Record::Prediction(_) => "prediction",
        Record::Representation(_) => "representation",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub line: usize,
    pub locator: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {} [{}]: {}", self.line, self.locator, self.message)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub records_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Default)]
struct Validator {
    report: ValidationReport,
    relations: HashMap<Pid, usize>,
    query_ids: HashMap<String, usize>,
    pending_refs: Vec<(usize, String, Pid)>,
    dim: Option<usize>,
}

impl Validator {
    fn flag(&mut self, line: usize, locator: impl Into<String>, message: impl Into<String>) {
        self.report.violations.push(Violation {
            line,
            locator: locator.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, line: usize, rec: Record) {
        self.report.records_checked += 1;
        match rec {
            Record::Relation(r) => {
                let loc = format!("relation {}", r.pid);
                for m in r.violations() {
                    self.flag(line, loc.clone(), m);
                }
                if let Some(prev) = self.relations.insert(r.pid.clone(), line) {
                    self.flag(line, loc, format!("duplicate relation (first at line {prev})"));
                }
            }
            Record::Query(q) => {
                let loc = format!("query {}", q.query.query_id);
                if q.query.query_id.is_empty() {
                    self.flag(line, loc.clone(), "empty query_id");
                }
                if let Some(prev) = self.query_ids.insert(q.query.query_id.clone(), line) {
                    self.flag(line, loc.clone(), format!("duplicate query_id (first at line {prev})"));
                }
                for m in q.answers.violations() {
                    self.flag(line, loc.clone(), m);
                }
                self.pending_refs.push((line, loc, q.query.relation_pid));
            }
            Record::Prediction(p) => {
                let loc = format!("prediction {}#{}", p.query_id, p.template_index);
                for m in p.violations() {
                    self.flag(line, loc.clone(), m);
                }
            }
            Record::Representation(r) => {
                let loc = format!("representation {}#{}", r.query_id, r.template_index);
                for m in r.violations() {
                    self.flag(line, loc.clone(), m);
                }
                match self.dim {
                    None => self.dim = Some(r.vector.len()),
                    Some(d) if d != r.vector.len() => {
                        self.flag(line, loc, format!("vector dimension {} != {d}", r.vector.len()))
                    }
                    _ => {}
                }
            }
        }
    }

    fn finish(mut self) -> ValidationReport {
        let pending = std::mem::take(&mut self.pending_refs);
        for (line, loc, pid) in pending {
            if !self.relations.contains_key(&pid) {
                self.flag(line, loc, format!("unknown relation {pid}"));
            }
        }
        self.report.violations.sort_by_key(|v| v.line);
        self.report
    }
}

/// Validates a stream of `(line number, parsed record)` pairs. Ill-formed
/// lines are reported as violations, never dropped.
pub fn validate_dataset<I>(records: I) -> ValidationReport
where
    I: IntoIterator<Item = (usize, Result<Record, String>)>,
{
    let mut v = Validator::default();
    for (line, rec) in records {
        match rec {
            Ok(r) => v.check(line, r),
            Err(message) => {
                v.report.records_checked += 1;
                v.flag(line, "record", format!("ill-formed record: {message}"));
            }
        }
    }
    v.finish()
}

pub fn validate_str(text: &str) -> ValidationReport {
    validate_dataset(
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, jsonl::parse_line::<Record>(l))),
    )
}

pub fn validate_file(path: &Path) -> Result<ValidationReport, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    Ok(validate_str(&text))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, DataError> {
    read_kind(path, |r| match r {
        Record::Prediction(p) => Ok(p),
        other => Err(record_kind(&other)),
    })
}

pub fn read_representations(path: &Path) -> Result<Vec<RepresentationRecord>, DataError> {
    read_kind(path, |r| match r {
        Record::Representation(p) => Ok(p),
        other => Err(record_kind(&other)),
    })
}

pub fn write_predictions(path: &Path, preds: &[PredictionRecord]) -> Result<(), DataError> {
    let recs: Vec<Record> = preds.iter().cloned().map(Record::Prediction).collect();
    jsonl::write(path, &recs)
}

pub fn write_representations(path: &Path, reps: &[RepresentationRecord]) -> Result<(), DataError> {
    let recs: Vec<Record> = reps.iter().cloned().map(Record::Representation).collect();
    jsonl::write(path, &recs)
}

fn read_kind<T>(
    path: &Path,
    pick: impl Fn(Record) -> Result<T, &'static str>,
) -> Result<Vec<T>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let report = validate_str(&text);
    if let Some(v) = report.violations.first() {
        return Err(DataError::Parse {
            path: path.to_path_buf(),
            line: v.line,
            message: v.message.clone(),
        });
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: Record = jsonl::parse_line(line).expect("validated above");
        let item = pick(rec).map_err(|kind| DataError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("unexpected {kind} record"),
        })?;
        out.push(item);
    }
    Ok(out)
}
