//! Confusion matrices and F1 scores over the three component labels.
//!
//! All scores are percentages kept at full precision; rounding to one
//! decimal happens only when formatting.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::ArgLabel;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("duplicate instance id `{0}`")]
    DuplicateInstanceId(String),
    #[error("no scored predictions (all {failed} failed or input empty)")]
    EmptyMatrix { failed: usize },
}

/// A predicted label paired with gold. Failed predictions have no label and
/// are excluded from scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub predicted: Option<ArgLabel>,
    pub gold: ArgLabel,
    pub failed: bool,
}

impl Prediction {
    pub fn ok(instance_id: impl Into<String>, predicted: ArgLabel, gold: ArgLabel) -> Self {
        Self {
            instance_id: instance_id.into(),
            predicted: Some(predicted),
            gold,
            failed: false,
        }
    }

    pub fn failed(instance_id: impl Into<String>, gold: ArgLabel) -> Self {
        Self {
            instance_id: instance_id.into(),
            predicted: None,
            gold,
            failed: true,
        }
    }
}

/// Rows are gold labels, columns predicted labels, both in canonical order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
    pub failed: usize,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        Self { counts, failed: 0 }
    }

    pub fn get(&self, gold: ArgLabel, predicted: ArgLabel) -> u64 {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn support(&self, gold: ArgLabel) -> u64 {
        self.counts[gold.index()].iter().sum()
    }

    pub fn predicted_total(&self, predicted: ArgLabel) -> u64 {
        self.counts.iter().map(|row| row[predicted.index()]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn confusion(predictions: &[Prediction]) -> Result<ConfusionMatrix, MetricsError> {
    let mut seen = HashSet::new();
    let mut matrix = ConfusionMatrix::default();
    for p in predictions {
        if !seen.insert(p.instance_id.as_str()) {
            return Err(MetricsError::DuplicateInstanceId(p.instance_id.clone()));
        }
        match (p.failed, p.predicted) {
            (false, Some(label)) => matrix.counts[p.gold.index()][label.index()] += 1,
            _ => matrix.failed += 1,
        }
    }
    Ok(matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: ArgLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Canonical label order.
    pub per_class: [ClassScores; 3],
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub scored: u64,
    pub failed: usize,
}

impl EvalReport {
    pub fn class(&self, label: ArgLabel) -> &ClassScores {
        &self.per_class[label.index()]
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Unweighted mean of per-class F1 scores.
pub fn macro_average(class_f1: [f64; 3]) -> f64 {
    class_f1.iter().sum::<f64>() / 3.0
}

/// Rounds to one decimal place, the precision reports are printed with.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

pub fn f1_scores(matrix: &ConfusionMatrix) -> Result<EvalReport, MetricsError> {
    let total = matrix.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix {
            failed: matrix.failed,
        });
    }
    let per_class = ArgLabel::ALL.map(|label| {
        let tp = matrix.get(label, label);
        let support = matrix.support(label);
        let precision = ratio(tp, matrix.predicted_total(label));
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassScores {
            label,
            precision: 100.0 * precision,
            recall: 100.0 * recall,
            f1: 100.0 * f1,
            support,
        }
    });
    let macro_f1 = macro_average(per_class.map(|c| c.f1));
    let weighted_f1 = per_class
        .iter()
        .map(|c| c.support as f64 * c.f1)
        .sum::<f64>()
        / total as f64;
    Ok(EvalReport {
        per_class,
        macro_f1,
        weighted_f1,
        scored: total,
        failed: matrix.failed,
    })
}

pub fn evaluate(predictions: &[Prediction]) -> Result<EvalReport, MetricsError> {
    f1_scores(&confusion(predictions)?)
}

const HEADER_COLUMNS: [&str; 5] = ["Macro F1", "W-F1", "MC", "Claim", "Premise"];

fn method_width(names: &[&str]) -> usize {
    names.iter().map(|n| n.chars().count()).max().unwrap_or(0).max(6)
}

fn header(width: usize) -> String {
    let mut line = format!("{:<width$}", "Method");
    for col in HEADER_COLUMNS {
        let _ = write!(line, " | {col:>8}");
    }
    line
}

fn row(method: &str, report: &EvalReport, width: usize) -> String {
    let cells = [
        report.macro_f1,
        report.weighted_f1,
        report.class(ArgLabel::MajorClaim).f1,
        report.class(ArgLabel::Claim).f1,
        report.class(ArgLabel::Premise).f1,
    ];
    let mut line = format!("{method:<width$}");
    for v in cells {
        let _ = write!(line, " | {v:>8.1}");
    }
    line
}

/// Fixed-width, one-decimal table row for a single method, followed by the
/// failed-instance line.
pub fn format_report(method: &str, report: &EvalReport) -> String {
    format_table(&[(method, report)])
}

/// Several methods in one table, one failed-instance line per method.
pub fn format_table(rows: &[(&str, &EvalReport)]) -> String {
    let width = method_width(&rows.iter().map(|(m, _)| *m).collect::<Vec<_>>());
    let head = header(width);
    let mut out = format!("{head}\n{}\n", "-".repeat(head.len()));
    for (method, report) in rows {
        out.push_str(&row(method, report, width));
        out.push('\n');
    }
    for (method, report) in rows {
        if rows.len() > 1 {
            let _ = write!(out, "{method} ");
        }
        let _ = writeln!(out, "failed: {} (excluded)", report.failed);
    }
    out
}
