use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "task,prevalence,micro_f1,macro_f1,auroc,auprc,f1";

/// One report line; `None` renders as an empty cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsRow {
    pub task: String,
    pub prevalence: Option<f64>,
    pub micro_f1: Option<f64>,
    pub macro_f1: Option<f64>,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub f1: Option<f64>,
}

impl MetricsRow {
    pub fn new(task: impl Into<String>) -> Self {
        MetricsRow {
            task: task.into(),
            ..Default::default()
        }
    }

    fn cells(&self) -> [Option<f64>; 6] {
        [self.prevalence, self.micro_f1, self.macro_f1, self.auroc, self.auprc, self.f1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.task.is_empty() || self.task.contains([',', '\n']) {
            return Err(Error::invalid(format!("bad task name `{}`", self.task)));
        }
        for v in self.cells().into_iter().flatten() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("metric {v} of `{}` is outside [0, 1]", self.task)));
            }
        }
        Ok(())
    }

    /// Three decimals per cell.
    pub fn to_csv_line(&self) -> String {
        let mut line = self.task.clone();
        for cell in self.cells() {
            line.push(',');
            if let Some(v) = cell {
                let _ = write!(line, "{v:.3}");
            }
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub overall: MetricsRow,
}

impl MetricsReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for row in self.rows.iter().chain(std::iter::once(&self.overall)) {
            row.validate()?;
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        Ok(out)
    }

    pub fn row(&self, task: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.task == task)
    }
}
