use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{auprc, auroc, f1_scores, predict_proba, train_logreg, LogRegConfig, MetricsReport, MetricsRow};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Diagnosis-style label: reports micro/macro F1 over {negative, positive}.
    Classification,
    /// Binary outcome such as readmission: reports AUROC, AUPRC and the
    /// two-class micro F1.
    Outcome,
}

/// A binary task on one label, optionally restricted to admissions where
/// `cohort` is true. Written `label` or `label@cohort`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub name: String,
    pub label: String,
    pub cohort: Option<String>,
    pub kind: TaskKind,
}

impl TaskSpec {
    pub fn parse(text: &str, kind: TaskKind) -> Result<Self> {
        let text = text.trim();
        let (label, cohort) = match text.split_once('@') {
            Some((l, c)) => (l.trim(), Some(c.trim().to_string())),
            None => (text, None),
        };
        if label.is_empty() || cohort.as_deref() == Some("") || text.contains(',') {
            return Err(Error::invalid(format!("bad task `{text}`")));
        }
        Ok(TaskSpec {
            name: text.to_string(),
            label: label.to_string(),
            cohort,
            kind,
        })
    }
}

impl fmt::Display for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(TaskKind::Classification),
            "outcome" => Ok(TaskKind::Outcome),
            other => Err(Error::invalid(format!("unknown task kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub l2_lambda: f64,
    pub logreg: LogRegConfig,
    pub threshold: f64,
    /// Z-score features with training-set statistics before fitting.
    pub standardize: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            l2_lambda: 1.0,
            logreg: LogRegConfig::default(),
            threshold: 0.5,
            standardize: true,
        }
    }
}

/// Embedding rows with the label map of the admission each row belongs to.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub vectors: Matrix,
    pub labels: Vec<BTreeMap<String, bool>>,
}

impl LabeledSet {
    fn label(&self, i: usize, name: &str) -> Result<bool> {
        self.labels[i]
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("row {i} lacks label `{name}`")))
    }

    /// Rows in the task's cohort and their target values.
    fn select(&self, task: &TaskSpec) -> Result<(Vec<usize>, Vec<bool>)> {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..self.labels.len() {
            let target = self.label(i, &task.label)?;
            if let Some(c) = &task.cohort {
                if !self.label(i, c)? {
                    continue;
                }
            }
            rows.push(i);
            y.push(target);
        }
        Ok((rows, y))
    }

    fn gather(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.vectors.cols());
        for (k, &i) in rows.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.vectors.row(i));
        }
        out
    }
}

fn standardize(train: &mut Matrix, test: &mut Matrix) {
    let (m, d) = train.shape();
    for j in 0..d {
        let mean = (0..m).map(|i| train[(i, j)]).sum::<f64>() / m as f64;
        let var = (0..m).map(|i| (train[(i, j)] - mean).powi(2)).sum::<f64>() / m as f64;
        let sd = if var > 1e-24 { var.sqrt() } else { 1.0 };
        for i in 0..m {
            train[(i, j)] = (train[(i, j)] - mean) / sd;
        }
        for i in 0..test.rows() {
            test[(i, j)] = (test[(i, j)] - mean) / sd;
        }
    }
}

struct TaskOutcome {
    row: MetricsRow,
    /// `[negative, positive]` truth and predictions for pooling into the overall row.
    two_class: Option<(Vec<Vec<bool>>, Vec<Vec<bool>>)>,
}

fn run_one(train: &LabeledSet, test: &LabeledSet, task: &TaskSpec, cfg: &SuiteConfig) -> Result<TaskOutcome> {
    let (train_rows, y_train) = train.select(task)?;
    let (test_rows, y_test) = test.select(task)?;
    let mut row = MetricsRow::new(task.name.clone());
    let cohort = y_train.len() + y_test.len();
    if cohort > 0 {
        let positives = y_train.iter().chain(&y_test).filter(|&&v| v).count();
        row.prevalence = Some(positives as f64 / cohort as f64);
    }
    let both_train = y_train.iter().any(|&v| v) && y_train.iter().any(|&v| !v);
    if !both_train || y_test.is_empty() {
        return Ok(TaskOutcome { row, two_class: None });
    }

    let mut x_train = train.gather(&train_rows);
    let mut x_test = test.gather(&test_rows);
    if cfg.standardize {
        standardize(&mut x_train, &mut x_test);
    }
    let model = train_logreg(&x_train, &y_train, cfg.l2_lambda, &cfg.logreg)?;
    let probs = predict_proba(&model, &x_test)?;
    let pred: Vec<bool> = probs.iter().map(|&p| p >= cfg.threshold).collect();

    let truth2 = vec![y_test.iter().map(|&v| !v).collect::<Vec<_>>(), y_test.clone()];
    let pred2 = vec![pred.iter().map(|&v| !v).collect::<Vec<_>>(), pred];
    let f = f1_scores(&truth2, &pred2)?;
    match task.kind {
        TaskKind::Classification => {
            row.micro_f1 = Some(f.micro_f1);
            row.macro_f1 = Some(f.macro_f1);
        }
        TaskKind::Outcome => {
            row.auroc = auroc(&y_test, &probs).ok();
            row.auprc = auprc(&y_test, &probs).ok();
            row.f1 = Some(f.micro_f1);
        }
    }
    Ok(TaskOutcome {
        row,
        two_class: Some((truth2, pred2)),
    })
}

/// Fits one logistic regression per task on `train` and scores it on `test`.
/// Tasks whose training cohort lacks a class keep only their prevalence.
/// The overall row pools the two-class counts of every classification task.
pub fn run_task_suite(
    train: &LabeledSet,
    test: &LabeledSet,
    tasks: &[TaskSpec],
    cfg: &SuiteConfig,
    exec: Execution,
) -> Result<MetricsReport> {
    if train.labels.is_empty() || test.labels.is_empty() {
        return Err(Error::invalid("task suite needs non-empty train and test sets"));
    }
    for set in [train, test] {
        if set.vectors.rows() != set.labels.len() {
            return Err(Error::shape(set.labels.len(), set.vectors.rows()));
        }
    }
    if train.vectors.cols() != test.vectors.cols() {
        return Err(Error::shape(train.vectors.cols(), test.vectors.cols()));
    }
    let outcomes = exec::map_slice(exec, tasks, |t| run_one(train, test, t, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut pooled_truth = Vec::new();
    let mut pooled_pred = Vec::new();
    for (o, t) in outcomes.iter().zip(tasks) {
        if let (TaskKind::Classification, Some((truth, pred))) = (t.kind, &o.two_class) {
            pooled_truth.extend(truth.iter().cloned());
            pooled_pred.extend(pred.iter().cloned());
        }
    }
    let mut overall = MetricsRow::new("overall");
    if !pooled_truth.is_empty() {
        let f = f1_scores(&pooled_truth, &pooled_pred)?;
        overall.micro_f1 = Some(f.micro_f1);
        overall.macro_f1 = Some(f.macro_f1);
    }
    Ok(MetricsReport {
        rows: outcomes.into_iter().map(|o| o.row).collect(),
        overall,
    })
}
