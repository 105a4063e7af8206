//! Experiment reports.
//!
//! `report.json` layout (schema `rfgnn-report`, version 1):
//!
//! ```text
//! {
//!   "schema": "rfgnn-report", "version": 1,
//!   "command": "train" | "evaluate" | "ablate" | "sweep" | "noise",
//!   "dataset": {"source", "nodes", "features", "relations", "edges", "classes", "test_nodes"},
//!   "config": { ...echo of the run configuration... },
//!   "groups": [
//!     {
//!       "model": "baseline" | "e" | "es" | "full",
//!       "parameter": "alpha" | "beta" | "gamma" | "S" | "noise"   (sweeps only),
//!       "value": 0.8                                            (sweeps only),
//!       "runs": [{"seed", "metrics": {...}, "branch_accuracies": [...], "branch_similarity": [[...]]}],
//!       "summary": {"runs", "accuracy": {"mean", "std"}, "precision": ..., "recall": ..., "f1": ...}
//!     }
//!   ]
//! }
//! ```
//!
//! `metrics` holds `accuracy`, `precision`, `recall`, `f1`, plus `confusion`
//! (`tp`, `tn`, `fp`, `fn`) for binary tasks or `per_class` one-vs-rest scores
//! otherwise. Numbers are written in shortest round-trip form, so equal runs
//! give byte-identical files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{aggregate_runs, Aggregate, RunMetrics};

pub const REPORT_SCHEMA: &str = "rfgnn-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub nodes: usize,
    pub features: usize,
    pub relations: usize,
    pub edges: usize,
    pub classes: usize,
    pub test_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub metrics: RunMetrics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branch_accuracies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branch_similarity: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportGroup {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub runs: Vec<RunReport>,
    pub summary: Aggregate,
}

impl ReportGroup {
    pub fn new(model: impl Into<String>, runs: Vec<RunReport>) -> Self {
        let summary = aggregate_runs(runs.iter().map(|r| &r.metrics));
        Self {
            model: model.into(),
            parameter: None,
            value: None,
            runs,
            summary,
        }
    }

    pub fn at(mut self, parameter: impl Into<String>, value: f64) -> Self {
        self.parameter = Some(parameter.into());
        self.value = Some(value);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: u32,
    pub command: String,
    pub dataset: DatasetSummary,
    pub config: serde_json::Value,
    pub groups: Vec<ReportGroup>,
}

fn fmt_value(v: f64) -> String {
    // integers (branch counts) print without a trailing ".0"
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

impl Report {
    pub fn new(command: impl Into<String>, dataset: DatasetSummary, config: serde_json::Value, groups: Vec<ReportGroup>) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            version: REPORT_VERSION,
            command: command.into(),
            dataset,
            config,
            groups,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable report") + "\n"
    }

    /// Aligned plain-text summary table.
    pub fn to_text(&self) -> String {
        let d = &self.dataset;
        let mut out = format!(
            "rfgnn {}: {} (N={}, M={}, K={}, C={}, edges={}, test nodes={})\n\n",
            self.command, d.source, d.nodes, d.features, d.relations, d.classes, d.edges, d.test_nodes
        );
        let header = ["model", "setting", "runs", "accuracy", "precision", "recall", "f1"];
        let cell = |m: &super::MeanStd| format!("{:.4} ± {:.4}", m.mean, m.std);
        let rows: Vec<[String; 7]> = self
            .groups
            .iter()
            .map(|g| {
                let setting = match (&g.parameter, g.value) {
                    (Some(p), Some(v)) => format!("{p}={}", fmt_value(v)),
                    _ => "-".into(),
                };
                [
                    g.model.clone(),
                    setting,
                    g.summary.runs.to_string(),
                    cell(&g.summary.accuracy),
                    cell(&g.summary.precision),
                    cell(&g.summary.recall),
                    cell(&g.summary.f1),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: Vec<&str>| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        out += &line(header.to_vec());
        out += &line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
        for r in &rows {
            out += &line(r.iter().map(String::as_str).collect());
        }
        out
    }

    /// One row per group: `parameter,value,model,runs,accuracy_mean,accuracy_std,f1_mean,f1_std`.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("parameter,value,model,runs,accuracy_mean,accuracy_std,f1_mean,f1_std\n");
        for g in &self.groups {
            let s = &g.summary;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                g.parameter.as_deref().unwrap_or(""),
                g.value.map(fmt_value).unwrap_or_default(),
                g.model,
                s.runs,
                s.accuracy.mean,
                s.accuracy.std,
                s.f1.mean,
                s.f1.std
            )
            .expect("writing to a string");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Confusion;

    fn report() -> Report {
        let run = |seed, acc| RunReport {
            seed,
            metrics: RunMetrics {
                accuracy: acc,
                precision: 0.5,
                recall: 0.25,
                f1: 1.0 / 3.0,
                confusion: Some(Confusion {
                    tp: 1,
                    tn: 2,
                    fp: 1,
                    fn_: 3,
                }),
                per_class: vec![],
            },
            branch_accuracies: vec![0.7, 0.75],
            branch_similarity: vec![vec![1.0, 0.9], vec![0.9, 1.0]],
        };
        let dataset = DatasetSummary {
            source: "synthetic".into(),
            nodes: 7,
            features: 3,
            relations: 1,
            edges: 9,
            classes: 2,
            test_nodes: 7,
        };
        Report::new(
            "sweep",
            dataset,
            serde_json::json!({"S": 10}),
            vec![
                ReportGroup::new("full", vec![run(0, 0.8), run(1, 0.9)]).at("S", 2.0),
                ReportGroup::new("full", vec![run(0, 0.85)]).at("alpha", 0.6),
            ],
        )
    }

    #[test]
    fn json_round_trip_and_schema() {
        let r = report();
        let text = r.to_json();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert!(text.contains("\"schema\": \"rfgnn-report\""));
        assert!(text.contains("\"fn\": 3"));
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn text_table_is_aligned() {
        let t = report().to_text();
        let lines: Vec<&str> = t.lines().skip(2).collect();
        assert!(lines[0].starts_with("model"));
        assert!(lines[2].contains("S=2") && lines[2].contains("0.8500 ± 0.0707"));
        assert!(lines[3].contains("alpha=0.6"));
        let col = lines[0].find("accuracy").unwrap();
        assert_eq!(lines[2].chars().take(col).count(), lines[0][..col].chars().count());
    }

    #[test]
    fn curve_rows_follow_groups() {
        let csv = report().curve_csv();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].starts_with("S,2,full,2,0.85"));
        assert!(rows[2].starts_with("alpha,0.6,full,1,0.85,0,"));
    }
}
