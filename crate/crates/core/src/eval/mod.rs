//! Downstream evaluation: L2-regularized logistic regression and the metrics
//! reported for classification and outcome tasks.

mod logreg;
mod metrics;
mod report;
mod suite;

pub use logreg::{predict_proba, train_logreg, LogRegConfig, LogRegModel};
pub use metrics::{auprc, auroc, binary_f1, f1_scores, F1Scores};
pub use report::{MetricsReport, MetricsRow, REPORT_HEADER};
pub use suite::{run_task_suite, LabeledSet, SuiteConfig, TaskKind, TaskSpec};
