//! Regression and classification metrics, and the plain-text report format.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Position;

/// Coefficient of determination, or a marker when the truth has no variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RSquared {
    Value(f64),
    Undefined,
}

impl RSquared {
    pub fn value(self) -> Option<f64> {
        match self {
            RSquared::Value(v) => Some(v),
            RSquared::Undefined => None,
        }
    }
}

impl fmt::Display for RSquared {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RSquared::Value(v) => write!(f, "{}", fmt_num(*v)),
            RSquared::Undefined => write!(f, "undefined"),
        }
    }
}

/// Error statistics over per-sample error magnitudes `e_n = |p_n - p̂_n|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub n: usize,
    pub rmse: f64,
    pub mae: f64,
    /// Population standard deviation of `e_n` about its mean.
    pub std_err: f64,
    pub r2: RSquared,
}

fn metrics_from(errors_sq: &[f64], total_sq: f64) -> RegressionMetrics {
    let n = errors_sq.len() as f64;
    let ss_res: f64 = errors_sq.iter().sum();
    let mae = errors_sq.iter().map(|e| e.sqrt()).sum::<f64>() / n;
    let var = errors_sq.iter().map(|e| (e.sqrt() - mae).powi(2)).sum::<f64>() / n;
    let r2 = if total_sq > 0.0 { RSquared::Value(1.0 - ss_res / total_sq) } else { RSquared::Undefined };
    RegressionMetrics { n: errors_sq.len(), rmse: (ss_res / n).sqrt(), mae, std_err: var.sqrt(), r2 }
}

fn check_lengths(a: usize, p: usize) -> Result<()> {
    if a != p {
        return Err(Error::LengthMismatch { expected: a, got: p });
    }
    if a == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Metrics for a scalar series.
pub fn regression_metrics(actual: &[f64], predicted: &[f64]) -> Result<RegressionMetrics> {
    check_lengths(actual.len(), predicted.len())?;
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let sq: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).collect();
    let tot = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    Ok(metrics_from(&sq, tot))
}

/// Metrics for planar positions; the per-sample error is the Euclidean
/// distance and the total sum of squares is taken about the mean position.
pub fn position_metrics(actual: &[Position], predicted: &[Position]) -> Result<RegressionMetrics> {
    check_lengths(actual.len(), predicted.len())?;
    let n = actual.len() as f64;
    let mx = actual.iter().map(|p| p.x).sum::<f64>() / n;
    let my = actual.iter().map(|p| p.y).sum::<f64>() / n;
    let sq: Vec<f64> = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a.x - p.x).powi(2) + (a.y - p.y).powi(2))
        .collect();
    let tot = actual.iter().map(|a| (a.x - mx).powi(2) + (a.y - my).powi(2)).sum();
    Ok(metrics_from(&sq, tot))
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub f1: f64,
    /// Set when the value came from a zero denominator and was reported as 0.
    pub precision_degenerate: bool,
    pub sensitivity_degenerate: bool,
    pub f1_degenerate: bool,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> ClassMetrics {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let (accuracy, _) = ratio(tp + tn, tp + tn + fp + fn_);
        let (precision, pd) = ratio(tp, tp + fp);
        let (sensitivity, sd) = ratio(tp, tp + fn_);
        let (f1, fd) = if pd || sd {
            (0.0, true)
        } else {
            ratio(2.0 * precision * sensitivity, precision + sensitivity)
        };
        ClassMetrics {
            accuracy,
            precision,
            sensitivity,
            f1,
            precision_degenerate: pd,
            sensitivity_degenerate: sd,
            f1_degenerate: fd,
        }
    }
}

/// `counts[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let k = labels.len();
        Self { labels, counts: vec![vec![0; k]; k] }
    }

    /// Builds the matrix from class indices in `0..n_classes`.
    pub fn from_indices(labels: Vec<String>, actual: &[usize], predicted: &[usize]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::LengthMismatch { expected: actual.len(), got: predicted.len() });
        }
        let mut cm = Self::new(labels);
        let k = cm.labels.len();
        for (&a, &p) in actual.iter().zip(predicted) {
            if a >= k || p >= k {
                return Err(Error::ShapeMismatch(format!("class index out of range for {k} classes")));
            }
            cm.counts[a][p] += 1;
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn class_counts(&self, class: usize) -> ClassCounts {
        let total = self.total();
        let tp = self.counts[class][class];
        let fn_ = self.counts[class].iter().sum::<u64>() - tp;
        let fp = self.counts.iter().map(|r| r[class]).sum::<u64>() - tp;
        ClassCounts { tp, fp, fn_, tn: total - tp - fp - fn_ }
    }

    /// Fraction of samples on the diagonal.
    pub fn overall_accuracy(&self) -> f64 {
        let diag: u64 = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<(String, ClassCounts, ClassMetrics)>,
    /// Unweighted mean over classes; a flag is set if any class was degenerate.
    pub macro_avg: ClassMetrics,
    pub overall_accuracy: f64,
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    if cm.labels.is_empty() || cm.total() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let per_class: Vec<_> = (0..cm.labels.len())
        .map(|i| {
            let c = cm.class_counts(i);
            (cm.labels[i].clone(), c, c.metrics())
        })
        .collect();
    let k = per_class.len() as f64;
    let mut m = ClassMetrics::default();
    for (_, _, c) in &per_class {
        m.accuracy += c.accuracy / k;
        m.precision += c.precision / k;
        m.sensitivity += c.sensitivity / k;
        m.f1 += c.f1 / k;
        m.precision_degenerate |= c.precision_degenerate;
        m.sensitivity_degenerate |= c.sensitivity_degenerate;
        m.f1_degenerate |= c.f1_degenerate;
    }
    Ok(ClassificationReport { per_class, macro_avg: m, overall_accuracy: cm.overall_accuracy() })
}

/// Fixed six-decimal rendering used in reports.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.6}")
}

/// Line-oriented report: `key<TAB>value` header lines, then an optional
/// fixed-width table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub entries: Vec<(String, String)>,
    pub table: Option<Table>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push_row<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(Into::into).collect());
    }

    pub fn render(&self) -> String {
        let cols = self.headers.len();
        let mut width = vec![0; cols];
        for row in std::iter::once(&self.headers).chain(&self.rows) {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: &[String]| {
            let cells: Vec<String> = row
                .iter()
                .zip(&width)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        };
        line(&mut out, &self.headers);
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "{}", rule.join("  "));
        for row in &self.rows {
            line(&mut out, row);
        }
        out
    }
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn add_regression(&mut self, prefix: &str, m: &RegressionMetrics) {
        self.push(format!("{prefix}n"), m.n);
        self.push(format!("{prefix}rmse"), fmt_num(m.rmse));
        self.push(format!("{prefix}mae"), fmt_num(m.mae));
        self.push(format!("{prefix}std"), fmt_num(m.std_err));
        self.push(format!("{prefix}r2"), m.r2);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}\t{v}");
        }
        if let Some(t) = &self.table {
            out.push('\n');
            out.push_str(&t.render());
        }
        out
    }
}

pub fn regression_table(rows: &[(&str, &RegressionMetrics)]) -> Table {
    let mut t = Table::new(["metric_set", "n", "rmse", "mae", "std", "r2"]);
    for (name, m) in rows {
        t.push_row([
            name.to_string(),
            m.n.to_string(),
            fmt_num(m.rmse),
            fmt_num(m.mae),
            fmt_num(m.std_err),
            m.r2.to_string(),
        ]);
    }
    t
}

pub fn classification_table(r: &ClassificationReport) -> Table {
    let flag = |v: f64, d: bool| if d { format!("{}*", fmt_num(v)) } else { fmt_num(v) };
    let mut t = Table::new(["class", "tp", "fp", "fn", "tn", "accuracy", "precision", "sensitivity", "f1"]);
    for (name, c, m) in &r.per_class {
        t.push_row([
            name.clone(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.tn.to_string(),
            fmt_num(m.accuracy),
            flag(m.precision, m.precision_degenerate),
            flag(m.sensitivity, m.sensitivity_degenerate),
            flag(m.f1, m.f1_degenerate),
        ]);
    }
    let m = &r.macro_avg;
    t.push_row([
        "macro".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        fmt_num(m.accuracy),
        flag(m.precision, m.precision_degenerate),
        flag(m.sensitivity, m.sensitivity_degenerate),
        flag(m.f1, m.f1_degenerate),
    ]);
    t
}
