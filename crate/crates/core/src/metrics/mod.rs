//! Confusion-matrix scores, multi-seed aggregation and experiment reports.

mod report;
mod scores;

pub use report::{DatasetSummary, Report, ReportGroup, RunReport, REPORT_SCHEMA, REPORT_VERSION};
pub use scores::{
    accuracy, aggregate_runs, confusion, confusion_for_class, evaluate, mean_std, metrics_from_confusion, Aggregate,
    ClassMetrics, Confusion, CoreMetrics, MeanStd, RunMetrics,
};
