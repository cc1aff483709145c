//! Journey data model: medical codes, admissions, segmentation and splits.

mod journey;
mod segment;
mod split;
mod synthetic;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

pub use journey::{
    ingest_journeys, parse_cohort, parse_durations, parse_journeys, read_cohort, write_durations,
    write_journeys, VocabMode,
};
pub use segment::{segment_admission, Segment, SegmentedAdmission, SEGMENT_MINUTES};
pub use split::{split_cohort, CohortSplit};
pub use synthetic::{generate_synthetic_cohort, SyntheticConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodeKind {
    Diagnosis,
    Procedure,
}

impl CodeKind {
    pub fn prefix(self) -> &'static str {
        match self {
            CodeKind::Diagnosis => "dx-",
            CodeKind::Procedure => "px-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MedicalCode {
    pub kind: CodeKind,
    pub name: String,
    pub index: usize,
}

impl MedicalCode {
    /// Splits `dx-<name>` / `px-<name>` into kind and name.
    pub fn parse(serialized: &str) -> Result<(CodeKind, &str)> {
        let (kind, name) = if let Some(name) = serialized.strip_prefix("dx-") {
            (CodeKind::Diagnosis, name)
        } else if let Some(name) = serialized.strip_prefix("px-") {
            (CodeKind::Procedure, name)
        } else {
            return Err(Error::invalid(format!(
                "code `{serialized}` must start with dx- or px-"
            )));
        };
        if name.is_empty() || name.contains([',', '\n', '\r']) || name.trim() != name {
            return Err(Error::invalid(format!("bad code name in `{serialized}`")));
        }
        Ok((kind, name))
    }

    pub fn serialized(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for MedicalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.name)
    }
}

/// Dense, insertion-ordered code index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodeVocabulary {
    codes: Vec<MedicalCode>,
    lookup: HashMap<String, usize>,
}

impl CodeVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of the code, adding it if it is new.
    pub fn intern(&mut self, kind: CodeKind, name: &str) -> usize {
        let key = format!("{}{}", kind.prefix(), name);
        if let Some(&i) = self.lookup.get(&key) {
            return i;
        }
        let index = self.codes.len();
        self.codes.push(MedicalCode {
            kind,
            name: name.to_string(),
            index,
        });
        self.lookup.insert(key, index);
        index
    }

    pub fn intern_serialized(&mut self, serialized: &str) -> Result<usize> {
        let (kind, name) = MedicalCode::parse(serialized)?;
        Ok(self.intern(kind, name))
    }

    pub fn index_of(&self, serialized: &str) -> Option<usize> {
        self.lookup.get(serialized).copied()
    }

    pub fn get(&self, index: usize) -> Option<&MedicalCode> {
        self.codes.get(index)
    }

    pub fn codes(&self) -> &[MedicalCode] {
        &self.codes
    }

    pub fn names(&self) -> Vec<String> {
        self.codes.iter().map(MedicalCode::serialized).collect()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    /// Minutes since admission start.
    pub time: u32,
    pub code: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Admission {
    pub admission_id: String,
    pub patient_id: String,
    pub events: Vec<Event>,
    pub labels: BTreeMap<String, bool>,
    pub duration_minutes: u32,
}

impl Admission {
    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if self.duration_minutes == 0 {
            return Err(Error::invalid(format!(
                "admission {} has zero duration",
                self.admission_id
            )));
        }
        if self.events.windows(2).any(|w| w[0].time > w[1].time) {
            return Err(Error::invalid(format!(
                "admission {} events are not time-sorted",
                self.admission_id
            )));
        }
        for e in &self.events {
            if e.time >= self.duration_minutes {
                return Err(Error::invalid(format!(
                    "admission {}: event at minute {} is past duration {}",
                    self.admission_id, e.time, self.duration_minutes
                )));
            }
            if e.code >= vocab_size {
                return Err(Error::IndexOutOfRange {
                    index: e.code,
                    size: vocab_size,
                });
            }
        }
        Ok(())
    }

    /// Distinct codes across the whole admission, ascending.
    pub fn distinct_codes(&self) -> Vec<usize> {
        let mut codes: Vec<usize> = self.events.iter().map(|e| e.code).collect();
        codes.sort_unstable();
        codes.dedup();
        codes
    }

    pub fn label(&self, name: &str) -> Option<bool> {
        self.labels.get(name).copied()
    }
}

/// Admissions plus the vocabulary their event codes index into.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cohort {
    pub admissions: Vec<Admission>,
    pub vocab: CodeVocabulary,
}
