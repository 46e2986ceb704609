use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    FineTuned,
    ZeroShot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    pub name: String,
    pub kind: MethodKind,
    pub report: MetricsReport,
}

impl NamedReport {
    pub fn new(name: impl Into<String>, kind: MethodKind, report: MetricsReport) -> Self {
        Self {
            name: name.into(),
            kind,
            report,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub kind: MethodKind,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Best fine-tuned minus best zero-shot, by macro F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub fine_tuned: String,
    pub zero_shot: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub delta: Option<DeltaRow>,
}

pub const COLUMNS: [&str; 4] = ["Accuracy", "Precision", "Recall", "F1"];

pub fn comparison_report(reports: &[NamedReport]) -> ComparisonTable {
    let rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            name: r.name.clone(),
            kind: r.kind,
            accuracy: r.report.accuracy,
            precision: r.report.macro_precision,
            recall: r.report.macro_recall,
            f1: r.report.macro_f1,
        })
        .collect();
    let best = |kind| {
        rows.iter()
            .filter(|r| r.kind == kind)
            .fold(None::<&ComparisonRow>, |acc, r| match acc {
                Some(b) if b.f1 >= r.f1 => Some(b),
                _ => Some(r),
            })
    };
    let delta = match (best(MethodKind::FineTuned), best(MethodKind::ZeroShot)) {
        (Some(ft), Some(zs)) => Some(DeltaRow {
            fine_tuned: ft.name.clone(),
            zero_shot: zs.name.clone(),
            accuracy: ft.accuracy - zs.accuracy,
            precision: ft.precision - zs.precision,
            recall: ft.recall - zs.recall,
            f1: ft.f1 - zs.f1,
        }),
        _ => None,
    };
    ComparisonTable { rows, delta }
}

impl ComparisonTable {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("| Model | {} |\n|---|---|---|---|---|\n", COLUMNS.join(" | "));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {:.2} | {:.2} | {:.2} | {:.2} |",
                r.name, r.accuracy, r.precision, r.recall, r.f1
            );
        }
        if let Some(d) = &self.delta {
            let _ = writeln!(
                out,
                "| Δ ({} − {}) | {:+.2} | {:+.2} | {:+.2} | {:+.2} |",
                d.fine_tuned, d.zero_shot, d.accuracy, d.precision, d.recall, d.f1
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("model,kind,{}\n", COLUMNS.join(",").to_lowercase());
        for r in &self.rows {
            let kind = match r.kind {
                MethodKind::FineTuned => "fine_tuned",
                MethodKind::ZeroShot => "zero_shot",
            };
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4},{:.4},{:.4}",
                r.name, kind, r.accuracy, r.precision, r.recall, r.f1
            );
        }
        if let Some(d) = &self.delta {
            let _ = writeln!(
                out,
                "delta,{}-{},{:+.4},{:+.4},{:+.4},{:+.4}",
                d.fine_tuned, d.zero_shot, d.accuracy, d.precision, d.recall, d.f1
            );
        }
        out
    }
}
