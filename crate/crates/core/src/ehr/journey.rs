//! Line-oriented journey files.
//!
//! ```text
//! # patient,admission,time,unit,code[,label:<name>=<0|1>...]
//! P1,A1,0,day,dx-Hypertension,label:readmission=1
//! P1,A1,11,day,px-MRI Scan
//! ```
//!
//! A companion durations file holds `<admission_id>,<duration_minutes>`.
//! Admissions missing from it get `last event minute + 1`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Admission, CodeVocabulary, Cohort, Event, SEGMENT_MINUTES};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum VocabMode {
    /// Index codes in first-appearance order.
    Build,
    /// Resolve codes against a fixed vocabulary; unknown codes are errors.
    Use(CodeVocabulary),
}

struct PendingAdmission {
    patient_id: String,
    events: Vec<Event>,
    labels: BTreeMap<String, bool>,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_time(value: &str) -> std::result::Result<u32, String> {
    if value.starts_with('-') {
        return Err(format!("negative timestamp `{value}`"));
    }
    value
        .parse::<u32>()
        .map_err(|_| format!("timestamp `{value}` is not a non-negative integer"))
}

/// Parses journey text. `source` names the input in error messages.
pub fn parse_journeys(text: &str, source: &str, mode: VocabMode) -> Result<Cohort> {
    let (mut vocab, frozen) = match mode {
        VocabMode::Build => (CodeVocabulary::new(), false),
        VocabMode::Use(v) => (v, true),
    };
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };

    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, PendingAdmission> = HashMap::new();

    for (line_no, line) in data_lines(text) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 5 {
            return Err(err(
                line_no,
                format!("expected at least 5 fields, found {}", fields.len()),
            ));
        }
        let (patient_id, admission_id) = (fields[0], fields[1]);
        if patient_id.is_empty() || admission_id.is_empty() {
            return Err(err(line_no, "empty patient or admission id".into()));
        }
        let raw_time = parse_time(fields[2]).map_err(|m| err(line_no, m))?;
        let time = match fields[3] {
            "min" => raw_time,
            "day" => raw_time
                .checked_mul(SEGMENT_MINUTES)
                .ok_or_else(|| err(line_no, format!("day value {raw_time} overflows")))?,
            other => return Err(err(line_no, format!("unknown time unit `{other}`"))),
        };
        let code = if frozen {
            vocab
                .index_of(fields[4])
                .ok_or_else(|| err(line_no, format!("unknown code `{}`", fields[4])))?
        } else {
            vocab
                .intern_serialized(fields[4])
                .map_err(|e| err(line_no, e.to_string()))?
        };

        let entry = pending.entry(admission_id.to_string()).or_insert_with(|| {
            order.push(admission_id.to_string());
            PendingAdmission {
                patient_id: patient_id.to_string(),
                events: Vec::new(),
                labels: BTreeMap::new(),
            }
        });
        if entry.patient_id != patient_id {
            return Err(err(
                line_no,
                format!(
                    "admission {admission_id} belongs to patient {}, not {patient_id}",
                    entry.patient_id
                ),
            ));
        }
        entry.events.push(Event { time, code });

        for field in &fields[5..] {
            let spec = field
                .strip_prefix("label:")
                .ok_or_else(|| err(line_no, format!("unexpected field `{field}`")))?;
            let (name, value) = spec
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("label `{spec}` lacks `=`")))?;
            let value = match value.trim() {
                "0" => false,
                "1" => true,
                v => return Err(err(line_no, format!("label value `{v}` is not 0 or 1"))),
            };
            let name = name.trim();
            if name.is_empty() {
                return Err(err(line_no, "empty label name".into()));
            }
            if let Some(prev) = entry.labels.insert(name.to_string(), value) {
                if prev != value {
                    return Err(err(line_no, format!("conflicting values for label `{name}`")));
                }
            }
        }
    }

    let admissions = order
        .into_iter()
        .map(|id| {
            let mut p = pending.remove(&id).expect("admission recorded in order");
            p.events.sort_by_key(|e| e.time);
            let duration_minutes = p.events.last().map_or(1, |e| e.time + 1);
            Admission {
                admission_id: id,
                patient_id: p.patient_id,
                events: p.events,
                labels: p.labels,
                duration_minutes,
            }
        })
        .collect();
    Ok(Cohort { admissions, vocab })
}

pub fn parse_durations(text: &str, source: &str) -> Result<BTreeMap<String, u32>> {
    let mut out = BTreeMap::new();
    for (line_no, line) in data_lines(text) {
        let err = |message: String| Error::Parse {
            path: source.to_string(),
            line: line_no,
            message,
        };
        let (id, minutes) = line
            .split_once(',')
            .ok_or_else(|| err("expected `<admission_id>,<duration_minutes>`".into()))?;
        let minutes = parse_time(minutes.trim()).map_err(err)?;
        if minutes == 0 {
            return Err(err("duration must be at least 1 minute".into()));
        }
        if out.insert(id.trim().to_string(), minutes).is_some() {
            return Err(err(format!("duplicate duration for `{}`", id.trim())));
        }
    }
    Ok(out)
}

fn apply_durations(
    cohort: &mut Cohort,
    durations: &BTreeMap<String, u32>,
    source: &str,
) -> Result<()> {
    let known: HashMap<&str, usize> = cohort
        .admissions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.admission_id.as_str(), i))
        .collect();
    let mut updates = Vec::new();
    for (id, &minutes) in durations {
        let &i = known.get(id.as_str()).ok_or_else(|| {
            Error::Manifest(format!("{source}: duration for unknown admission `{id}`"))
        })?;
        updates.push((i, minutes));
    }
    for (i, minutes) in updates {
        let a = &mut cohort.admissions[i];
        if let Some(last) = a.events.last() {
            if last.time >= minutes {
                return Err(Error::Manifest(format!(
                    "{source}: admission `{}` has an event at minute {} but lasts {minutes}",
                    a.admission_id, last.time
                )));
            }
        }
        a.duration_minutes = minutes;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a journey file; durations default to `last event + 1`.
pub fn ingest_journeys(path: &Path, mode: VocabMode) -> Result<Cohort> {
    read_cohort(path, None, mode)
}

/// Reads a journey file together with an optional durations manifest.
pub fn read_cohort(journeys: &Path, durations: Option<&Path>, mode: VocabMode) -> Result<Cohort> {
    let durations = durations
        .map(|p| Ok::<_, Error>((read_text(p)?, p.display().to_string())))
        .transpose()?;
    parse_cohort(
        (&read_text(journeys)?, &journeys.display().to_string()),
        durations.as_ref().map(|(t, s)| (t.as_str(), s.as_str())),
        mode,
    )
}

/// In-memory counterpart of [`read_cohort`]; each input is `(text, source)`.
pub fn parse_cohort(journeys: (&str, &str), durations: Option<(&str, &str)>, mode: VocabMode) -> Result<Cohort> {
    let mut cohort = parse_journeys(journeys.0, journeys.1, mode)?;
    if let Some((text, source)) = durations {
        let table = parse_durations(text, source)?;
        apply_durations(&mut cohort, &table, source)?;
    }
    Ok(cohort)
}

/// Canonical journey text: minute units, labels on each admission's first line.
/// Admissions without events cannot be expressed and are skipped.
pub fn write_journeys(cohort: &Cohort) -> String {
    let mut out = String::from("# patient_id,admission_id,time,unit,code[,label:name=0|1]\n");
    for a in &cohort.admissions {
        for (k, e) in a.events.iter().enumerate() {
            let code = cohort
                .vocab
                .get(e.code)
                .map(|c| c.serialized())
                .unwrap_or_default();
            let _ = write!(out, "{},{},{},min,{}", a.patient_id, a.admission_id, e.time, code);
            if k == 0 {
                for (name, &value) in &a.labels {
                    let _ = write!(out, ",label:{name}={}", u8::from(value));
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_durations(cohort: &Cohort) -> String {
    let mut out = String::from("# admission_id,duration_minutes\n");
    for a in &cohort.admissions {
        let _ = writeln!(out, "{},{}", a.admission_id, a.duration_minutes);
    }
    out
}
