//! Confusion matrix, accuracy and support-weighted precision/recall/F1.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// `counts[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::Input(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &t) in preds.iter().zip(labels) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::Input(format!("class id out of range [0,{num_classes}): pred {p}, label {t}")));
        }
        counts[t][p] += 1;
    }
    let class_names = (0..num_classes).map(|k| format!("class_{k}")).collect();
    Ok(ConfusionMatrix { counts, class_names })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub avg_loss: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy plus per-class and support-weighted precision, recall and F1.
/// Empty denominators yield 0.
pub fn compute_report(m: &ConfusionMatrix, avg_loss: f64) -> Result<MetricsReport> {
    let total = m.total();
    if total == 0 {
        return Err(Error::Input("confusion matrix is empty".into()));
    }
    let k = m.num_classes();
    let trace: u64 = (0..k).map(|i| m.counts[i][i]).sum();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = m.counts[c][c];
            let precision = ratio(tp, m.col_sum(c));
            let recall = ratio(tp, m.row_sum(c));
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            ClassMetrics { precision, recall, f1, support: m.row_sum(c) }
        })
        .collect();
    let weighted = |f: fn(&ClassMetrics) -> f64| -> f64 {
        per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64
    };
    Ok(MetricsReport {
        accuracy: trace as f64 / total as f64,
        precision: weighted(|c| c.precision),
        recall: weighted(|c| c.recall),
        f1: weighted(|c| c.f1),
        avg_loss,
        per_class,
    })
}

/// Four decimals, rounding half away from zero.
pub fn fmt4(v: f64) -> String {
    format!("{:.4}", (v * 1e4).round() / 1e4)
}

const TABLE_HEADERS: [&str; 6] = ["Model", "Ave. Loss", "Accuracy", "Precision", "Recall", "F1-Score"];

/// Plain-text comparison table, one row per `(model name, report)`.
pub fn format_table(rows: &[(String, MetricsReport)]) -> String {
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|(name, r)| {
            [name.clone(), fmt4(r.avg_loss), fmt4(r.accuracy), fmt4(r.precision), fmt4(r.recall), fmt4(r.f1)]
        })
        .collect();
    let mut widths: [usize; 6] = TABLE_HEADERS.map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[String]| {
        let mut parts = Vec::new();
        for (i, c) in row.iter().enumerate() {
            if i == 0 {
                parts.push(format!("{c:<w$}", w = widths[0]));
            } else {
                parts.push(format!("{c:>w$}", w = widths[i]));
            }
        }
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &TABLE_HEADERS.map(String::from));
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    let _ = writeln!(out, "{}", "-".repeat(rule));
    for row in &cells {
        line(&mut out, row);
    }
    out
}

/// CSV with header `model,avg_loss,accuracy,precision,recall,f1`.
pub fn write_report_csv(rows: &[(String, MetricsReport)], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(["model", "avg_loss", "accuracy", "precision", "recall", "f1"])?;
    for (name, r) in rows {
        w.write_record([name.clone(), fmt4(r.avg_loss), fmt4(r.accuracy), fmt4(r.precision), fmt4(r.recall), fmt4(r.f1)])?;
    }
    w.flush()?;
    Ok(())
}
