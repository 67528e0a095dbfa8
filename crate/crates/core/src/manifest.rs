//! The relation manifest: predicates, mutability classes, cardinality
//! statistics and cloze templates, stored as TOML.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::jsonl::DataError;
use crate::types::Relation;

/// The 35-relation inventory shipped with the crate.
pub const SHIPPED: &str = include_str!("../data/relations.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "relation")]
    pub relations: Vec<Relation>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let m: Manifest = toml::from_str(text).map_err(|e| DataError::Invalid(format!("manifest: {e}")))?;
        let problems = m.violations();
        if !problems.is_empty() {
            return Err(DataError::Invalid(format!("manifest: {}", problems.join("; "))));
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn shipped() -> Self {
        Self::parse(SHIPPED).expect("shipped manifest is valid")
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for r in &self.relations {
            if !seen.insert(r.pid.clone()) {
                out.push(format!("duplicate relation {}", r.pid));
            }
            for v in r.violations() {
                out.push(format!("{}: {v}", r.pid));
            }
            for (i, t) in r.templates.iter().enumerate() {
                if let (Some(x), Some(y)) = (t.find(crate::SUBJECT_SLOT), t.find(crate::OBJECT_SLOT)) {
                    if x > y {
                        out.push(format!("{}: template {i} places the object before the subject", r.pid));
                    }
                }
            }
        }
        out
    }

    pub fn get(&self, pid: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.pid.as_str() == pid)
    }
}
