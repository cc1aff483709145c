//! Planted-partition cohort generator.
//!
//! Each admission gets one latent class. Its events are drawn from that
//! class's code pool with probability `within_class_prob` and from the other
//! pools otherwise. The last code of every pool is reserved as a risk marker
//! that only appears in readmitted admissions.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Admission, CodeKind, CodeVocabulary, Cohort, Event, SEGMENT_MINUTES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub patients: usize,
    pub classes: usize,
    pub codes_per_class: usize,
    pub within_class_prob: f64,
    pub mean_duration_minutes: u32,
    pub events_per_day: f64,
    pub readmission_base_rate: f64,
    /// Probability that a readmitted admission carries its class's risk code.
    pub readmission_signal: f64,
    pub mortality_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            patients: 100,
            classes: 4,
            codes_per_class: 10,
            within_class_prob: 0.8,
            mean_duration_minutes: 3 * SEGMENT_MINUTES,
            events_per_day: 8.0,
            readmission_base_rate: 0.2,
            readmission_signal: 0.7,
            mortality_rate: 0.08,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patients == 0 {
            return Err(Error::invalid("synthetic cohort needs at least one patient"));
        }
        if self.classes == 0 {
            return Err(Error::invalid("synthetic cohort needs at least one class"));
        }
        if self.codes_per_class < 2 {
            return Err(Error::invalid("codes_per_class must be at least 2"));
        }
        if self.mean_duration_minutes == 0 {
            return Err(Error::invalid("mean admission duration must be positive"));
        }
        if !(self.events_per_day > 0.0 && self.events_per_day.is_finite()) {
            return Err(Error::invalid("events_per_day must be positive"));
        }
        for (name, p) in [
            ("within_class_prob", self.within_class_prob),
            ("readmission_base_rate", self.readmission_base_rate),
            ("readmission_signal", self.readmission_signal),
            ("mortality_rate", self.mortality_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Vocabulary indices of class `c`'s pool; the last one is the risk code.
    pub fn class_pool(&self, c: usize) -> std::ops::Range<usize> {
        c * self.codes_per_class..(c + 1) * self.codes_per_class
    }

    pub fn class_label(c: usize) -> String {
        format!("class_{c}")
    }
}

pub fn generate_synthetic_cohort(cfg: &SyntheticConfig, seed: u64) -> Result<Cohort> {
    cfg.validate()?;
    let mut vocab = CodeVocabulary::new();
    for c in 0..cfg.classes {
        for k in 0..cfg.codes_per_class {
            let kind = if k % 2 == 0 {
                CodeKind::Diagnosis
            } else {
                CodeKind::Procedure
            };
            vocab.intern(kind, &format!("c{c}_{k}"));
        }
    }

    let regular = cfg.codes_per_class - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut admissions = Vec::with_capacity(cfg.patients);
    let width = cfg.patients.to_string().len();

    for i in 0..cfg.patients {
        let class = rng.gen_range(0..cfg.classes);
        let mean = cfg.mean_duration_minutes;
        let duration = rng.gen_range((mean / 2).max(1)..=mean + mean / 2);
        let days = f64::from(duration) / f64::from(SEGMENT_MINUTES);
        let n_events = ((days * cfg.events_per_day).round() as usize).max(1);

        let mut events = Vec::with_capacity(n_events + 2);
        for _ in 0..n_events {
            let pool_class = if cfg.classes == 1 || rng.gen_bool(cfg.within_class_prob) {
                class
            } else {
                let other = rng.gen_range(0..cfg.classes - 1);
                if other >= class {
                    other + 1
                } else {
                    other
                }
            };
            let code = pool_class * cfg.codes_per_class + rng.gen_range(0..regular);
            events.push(Event {
                time: rng.gen_range(0..duration),
                code,
            });
        }

        let readmitted = rng.gen_bool(cfg.readmission_base_rate);
        if readmitted && rng.gen_bool(cfg.readmission_signal) {
            events.push(Event {
                time: rng.gen_range(0..duration),
                code: cfg.class_pool(class).end - 1,
            });
        }
        let died = rng.gen_bool(cfg.mortality_rate);
        events.sort();

        let mut labels = BTreeMap::new();
        for c in 0..cfg.classes {
            labels.insert(SyntheticConfig::class_label(c), c == class);
        }
        labels.insert("readmission".to_string(), readmitted);
        labels.insert("mortality".to_string(), died);

        admissions.push(Admission {
            admission_id: format!("A{i:0width$}"),
            patient_id: format!("P{i:0width$}"),
            events,
            labels,
            duration_minutes: duration,
        });
    }
    Ok(Cohort { admissions, vocab })
}
