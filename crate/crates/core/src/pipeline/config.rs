//! Flat `key = value` configuration.
//!
//! ```text
//! # comment
//! seed = 42
//! output_dir = out/demo
//! synthetic.patients = 100
//! tasks.classification = class_0, class_1
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! Every key is validated before any stage runs; unknown keys are errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::ehr::SyntheticConfig;
use crate::embed::SgnsConfig;
use crate::error::{Error, Result};
use crate::eval::{LogRegConfig, SuiteConfig, TaskKind, TaskSpec};
use crate::exec::{derive_seed, Execution};
use crate::gat::Activation;
use crate::graph::{WalkConfig, DEFAULT_WINDOW_MINUTES};
use crate::visit::RefinerConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Journeys {
        journeys: PathBuf,
        durations: Option<PathBuf>,
    },
    Synthetic(SyntheticConfig),
}

/// Which visit vectors feed the downstream classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSource {
    Pooled,
    Refined,
}

/// Seeds handed to each randomized stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub master: u64,
    pub synthetic: u64,
    pub split: u64,
    pub walks: u64,
    pub sgns: u64,
    pub segment: u64,
    pub visit: u64,
}

impl StageSeeds {
    pub fn named(&self) -> [(&'static str, u64); 7] {
        [
            ("master", self.master),
            ("synthetic", self.synthetic),
            ("split", self.split),
            ("walks", self.walks),
            ("sgns", self.sgns),
            ("segment", self.segment),
            ("visit", self.visit),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub source: InputSource,
    pub output_dir: PathBuf,
    pub seeds: StageSeeds,
    pub window_minutes: u32,
    pub walk_p: f64,
    pub walk_q: f64,
    pub walks: WalkConfig,
    pub sgns: SgnsConfig,
    pub segment: RefinerConfig,
    pub visit: RefinerConfig,
    pub train_fraction: f64,
    pub eval_source: EvalSource,
    pub suite: SuiteConfig,
    pub tasks: Vec<TaskSpec>,
    pub execution: Execution,
    /// Hex SHA-256 of the sorted key/value pairs. `output_dir` and `parallel`
    /// do not change results and are left out.
    pub hash: String,
}

const KEYS: &[&str] = &[
    "seed",
    "output_dir",
    "parallel",
    "input.journeys",
    "input.durations",
    "synthetic.patients",
    "synthetic.classes",
    "synthetic.codes_per_class",
    "synthetic.within_class_prob",
    "synthetic.mean_duration_minutes",
    "synthetic.events_per_day",
    "synthetic.readmission_base_rate",
    "synthetic.readmission_signal",
    "synthetic.mortality_rate",
    "window_minutes",
    "walk.p",
    "walk.q",
    "walk.walks_per_node",
    "walk.length",
    "sgns.dim",
    "sgns.context_window",
    "sgns.negatives",
    "sgns.epochs",
    "sgns.learning_rate",
    "gat.heads",
    "gat.layers",
    "gat.activation",
    "gat.leak",
    "gat.epochs",
    "gat.learning_rate",
    "gat.batch_size",
    "gat.lambda_next",
    "gat.knn",
    "visit.epochs",
    "visit.learning_rate",
    "split.train_fraction",
    "split.seed",
    "logreg.l2_lambda",
    "logreg.max_iterations",
    "logreg.tolerance",
    "eval.source",
    "eval.threshold",
    "eval.standardize",
    "tasks.classification",
    "tasks.outcome",
];

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Raw entries in file order after comment stripping.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(config_err(format!("line {}: unknown key `{k}`", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(config_err(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(out)
}

struct Entries<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Entries<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| config_err(format!("`{key}` has invalid value `{v}`"))),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(config_err(format!("`{key}` expects a boolean, got `{v}`"))),
        }
    }

    fn list(&self, key: &str) -> Vec<&str> {
        self.raw(key)
            .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    }
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = Path::new(value);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn existing_file(base: &Path, key: &str, value: &str) -> Result<PathBuf> {
    let path = resolve(base, value);
    if !path.is_file() {
        return Err(config_err(format!("`{key}`: {} is not a readable file", path.display())));
    }
    Ok(path)
}

fn hash_entries(map: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (k, v) in map.iter().filter(|(k, _)| !matches!(k.as_str(), "output_dir" | "parallel")) {
        h.update(format!("{k}={v}\n").as_bytes());
    }
    hex::encode(h.finalize())
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base)
    }

    /// Parses and validates; `base` anchors relative paths.
    pub fn from_text(text: &str, base: &Path) -> Result<Self> {
        let map = parse_entries(text)?;
        let e = Entries { map: &map };

        let master: u64 = e.get("seed", 0)?;
        let seeds = StageSeeds {
            master,
            synthetic: derive_seed(master, 1),
            split: e.get("split.seed", derive_seed(master, 2))?,
            walks: derive_seed(master, 3),
            sgns: derive_seed(master, 4),
            segment: derive_seed(master, 5),
            visit: derive_seed(master, 6),
        };

        let output_dir = resolve(
            base,
            e.raw("output_dir").ok_or_else(|| config_err("`output_dir` is required"))?,
        );

        let has_synthetic = map.keys().any(|k| k.starts_with("synthetic."));
        let source = match (e.raw("input.journeys"), has_synthetic) {
            (Some(_), true) => return Err(config_err("set either `input.journeys` or `synthetic.*`, not both")),
            (Some(j), false) => InputSource::Journeys {
                journeys: existing_file(base, "input.journeys", j)?,
                durations: e
                    .raw("input.durations")
                    .map(|d| existing_file(base, "input.durations", d))
                    .transpose()?,
            },
            (None, _) => {
                if e.raw("input.durations").is_some() {
                    return Err(config_err("`input.durations` needs `input.journeys`"));
                }
                if !has_synthetic {
                    return Err(config_err("no input: set `input.journeys` or `synthetic.*` keys"));
                }
                let d = SyntheticConfig::default();
                let s = SyntheticConfig {
                    patients: e.get("synthetic.patients", d.patients)?,
                    classes: e.get("synthetic.classes", d.classes)?,
                    codes_per_class: e.get("synthetic.codes_per_class", d.codes_per_class)?,
                    within_class_prob: e.get("synthetic.within_class_prob", d.within_class_prob)?,
                    mean_duration_minutes: e.get("synthetic.mean_duration_minutes", d.mean_duration_minutes)?,
                    events_per_day: e.get("synthetic.events_per_day", d.events_per_day)?,
                    readmission_base_rate: e.get("synthetic.readmission_base_rate", d.readmission_base_rate)?,
                    readmission_signal: e.get("synthetic.readmission_signal", d.readmission_signal)?,
                    mortality_rate: e.get("synthetic.mortality_rate", d.mortality_rate)?,
                };
                s.validate().map_err(|err| config_err(err.to_string()))?;
                if s.patients < 2 {
                    return Err(config_err("synthetic cohort needs at least 2 patients to split"));
                }
                InputSource::Synthetic(s)
            }
        };

        let window_minutes = e.get("window_minutes", DEFAULT_WINDOW_MINUTES)?;
        if window_minutes == 0 {
            return Err(config_err("`window_minutes` must be at least 1"));
        }
        let walk_p: f64 = e.get("walk.p", 1.0)?;
        let walk_q: f64 = e.get("walk.q", 1.0)?;
        if !(walk_p > 0.0 && walk_p.is_finite() && walk_q > 0.0 && walk_q.is_finite()) {
            return Err(config_err("`walk.p` and `walk.q` must be positive"));
        }
        let wd = WalkConfig::default();
        let walks = WalkConfig {
            walks_per_node: e.get("walk.walks_per_node", wd.walks_per_node)?,
            length: e.get("walk.length", wd.length)?,
            seed: seeds.walks,
        };
        if walks.walks_per_node == 0 || walks.length < 2 {
            return Err(config_err("walks need walks_per_node >= 1 and length >= 2"));
        }

        let sd = SgnsConfig::default();
        let sgns = SgnsConfig {
            dim: e.get("sgns.dim", sd.dim)?,
            context_window: e.get("sgns.context_window", sd.context_window)?,
            negatives: e.get("sgns.negatives", sd.negatives)?,
            epochs: e.get("sgns.epochs", sd.epochs)?,
            learning_rate: e.get("sgns.learning_rate", sd.learning_rate)?,
            seed: seeds.sgns,
        };
        sgns.validate().map_err(|err| config_err(err.to_string()))?;

        let rd = RefinerConfig::default();
        let segment = RefinerConfig {
            heads: e.get("gat.heads", rd.heads)?,
            layers: e.get("gat.layers", rd.layers)?,
            activation: e.get::<Activation>("gat.activation", rd.activation)?,
            leak: e.get("gat.leak", rd.leak)?,
            epochs: e.get("gat.epochs", rd.epochs)?,
            learning_rate: e.get("gat.learning_rate", rd.learning_rate)?,
            batch_size: e.get("gat.batch_size", rd.batch_size)?,
            lambda_next: e.get("gat.lambda_next", rd.lambda_next)?,
            knn: e.get("gat.knn", rd.knn)?,
        };
        let check_refiner = |r: &RefinerConfig| -> Result<()> {
            r.validate().map_err(|err| config_err(err.to_string()))?;
            r.gat(sgns.dim).validate().map_err(|err| config_err(err.to_string()))
        };
        check_refiner(&segment)?;
        let visit = RefinerConfig {
            epochs: e.get("visit.epochs", segment.epochs)?,
            learning_rate: e.get("visit.learning_rate", segment.learning_rate)?,
            ..segment.clone()
        };
        check_refiner(&visit)?;

        let train_fraction: f64 = e.get("split.train_fraction", 0.8)?;
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(config_err(format!(
                "`split.train_fraction` = {train_fraction} is outside (0, 1)"
            )));
        }

        let ld = LogRegConfig::default();
        let suite = SuiteConfig {
            l2_lambda: e.get("logreg.l2_lambda", 1.0)?,
            logreg: LogRegConfig {
                max_iterations: e.get("logreg.max_iterations", ld.max_iterations)?,
                tolerance: e.get("logreg.tolerance", ld.tolerance)?,
            },
            threshold: e.get("eval.threshold", 0.5)?,
            standardize: e.flag("eval.standardize", true)?,
        };
        if !(suite.l2_lambda >= 0.0 && suite.l2_lambda.is_finite()) {
            return Err(config_err("`logreg.l2_lambda` must be non-negative"));
        }
        if !(suite.logreg.tolerance > 0.0) || suite.logreg.max_iterations == 0 {
            return Err(config_err("logreg needs a positive tolerance and iteration budget"));
        }
        if !(suite.threshold > 0.0 && suite.threshold < 1.0) {
            return Err(config_err("`eval.threshold` must lie in (0, 1)"));
        }
        let eval_source = match e.raw("eval.source").unwrap_or("refined") {
            "refined" => EvalSource::Refined,
            "pooled" => EvalSource::Pooled,
            other => return Err(config_err(format!("`eval.source` must be refined or pooled, got `{other}`"))),
        };

        let mut tasks = Vec::new();
        for (key, kind) in [
            ("tasks.classification", TaskKind::Classification),
            ("tasks.outcome", TaskKind::Outcome),
        ] {
            for t in e.list(key) {
                tasks.push(TaskSpec::parse(t, kind).map_err(|err| config_err(format!("`{key}`: {err}")))?);
            }
        }
        if tasks.is_empty() {
            return Err(config_err("no evaluation tasks configured"));
        }
        for (i, t) in tasks.iter().enumerate() {
            if tasks[..i].iter().any(|u| u.name == t.name) {
                return Err(config_err(format!("task `{}` listed twice", t.name)));
            }
        }

        let execution = Execution::from_flag(e.flag("parallel", false)?);

        Ok(PipelineConfig {
            source,
            output_dir,
            seeds,
            window_minutes,
            walk_p,
            walk_q,
            walks,
            sgns,
            segment,
            visit,
            train_fraction,
            eval_source,
            suite,
            tasks,
            execution,
            hash: hash_entries(&map),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "seed = 7\noutput_dir = out\nsynthetic.patients = 20\ntasks.classification = class_0\n";

    #[test]
    fn minimal_synthetic_config() {
        let cfg = PipelineConfig::from_text(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("/base/out"));
        assert!(matches!(cfg.source, InputSource::Synthetic(ref s) if s.patients == 20));
        assert_eq!(cfg.seeds.master, 7);
        assert_eq!(cfg.tasks.len(), 1);
        assert_eq!(cfg.execution, Execution::Sequential);
    }

    #[test]
    fn hash_ignores_output_dir_and_order() {
        let a = PipelineConfig::from_text(MINIMAL, Path::new(".")).unwrap();
        let reordered =
            "tasks.classification = class_0\nsynthetic.patients = 20\noutput_dir = elsewhere\nparallel = true\nseed = 7 # same\n";
        let b = PipelineConfig::from_text(reordered, Path::new(".")).unwrap();
        assert_eq!(a.hash, b.hash);
        let c = PipelineConfig::from_text(&MINIMAL.replace("seed = 7", "seed = 8"), Path::new(".")).unwrap();
        assert_ne!(a.hash, c.hash);
    }

    #[test]
    fn rejects_bad_values() {
        for extra in [
            "split.train_fraction = 1.5",
            "walk.q = 0",
            "window_minutes = 0",
            "sgns.dim = 1",
            "gat.heads = 5",
            "gat.activation = relu",
            "bogus = 1",
            "seed = 3",
            "input.journeys = /definitely/missing.txt",
            "eval.source = raw",
        ] {
            let text = format!("{MINIMAL}{extra}\n");
            let err = PipelineConfig::from_text(&text, Path::new(".")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{extra}: {err}");
        }
        let no_tasks = MINIMAL.replace("tasks.classification = class_0", "");
        assert!(PipelineConfig::from_text(&no_tasks, Path::new(".")).is_err());
    }
}
