//! Multiclass confusion counts and their binary Safe/Unsafe collapse.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{truth} truth labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no labels to score")]
    Empty,
}

/// Binary counts with every vulnerability class merged into Unsafe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tn: usize,
    pub fn_: usize,
    pub tp: usize,
    pub fp: usize,
}

impl BinaryCounts {
    pub fn total(&self) -> usize {
        self.tn + self.fn_ + self.tp + self.fp
    }

    pub fn accuracy(&self) -> f64 {
        pct(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        pct(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        pct(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Rows are truth, columns predictions, both in label order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub matrix: [[usize; 4]; 4],
}

fn check(truth: &[Label], pred: &[Label]) -> Result<(), MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), pred: pred.len() });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

pub fn confusion(truth: &[Label], pred: &[Label]) -> Result<ConfusionReport, MetricsError> {
    check(truth, pred)?;
    let mut matrix = [[0; 4]; 4];
    for (t, p) in truth.iter().zip(pred) {
        matrix[t.index()][p.index()] += 1;
    }
    Ok(ConfusionReport { matrix })
}

impl ConfusionReport {
    pub fn total(&self) -> usize {
        self.matrix.iter().flatten().sum()
    }

    /// A vulnerable sample predicted as another vulnerability class still
    /// counts as a true positive.
    pub fn binary(&self) -> BinaryCounts {
        let mut b = BinaryCounts::default();
        for (t, row) in self.matrix.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                match (t == 0, p == 0) {
                    (true, true) => b.tn += n,
                    (true, false) => b.fp += n,
                    (false, true) => b.fn_ += n,
                    (false, false) => b.tp += n,
                }
            }
        }
        b
    }

    /// Exact-class accuracy as a percentage.
    pub fn multiclass_accuracy(&self) -> f64 {
        pct((0..4).map(|i| self.matrix[i][i]).sum(), self.total())
    }

    pub fn accuracy(&self) -> f64 {
        self.binary().accuracy()
    }

    pub fn precision(&self) -> f64 {
        self.binary().precision()
    }

    pub fn recall(&self) -> f64 {
        self.binary().recall()
    }

    pub fn f1(&self) -> f64 {
        self.binary().f1()
    }
}

/// Label vectors reproducing given binary counts (Unsafe truths as XSS).
pub fn labels_from_counts(c: BinaryCounts) -> (Vec<Label>, Vec<Label>) {
    let mut truth = Vec::with_capacity(c.total());
    let mut pred = Vec::with_capacity(c.total());
    for (n, t, p) in [
        (c.tn, Label::Safe, Label::Safe),
        (c.fn_, Label::Xss, Label::Safe),
        (c.tp, Label::Xss, Label::Xss),
        (c.fp, Label::Safe, Label::Xss),
    ] {
        truth.extend(std::iter::repeat_n(t, n));
        pred.extend(std::iter::repeat_n(p, n));
    }
    (truth, pred)
}

/// Share of each class predicted exactly; `None` for classes absent from
/// the truth.
pub fn per_class_correct(truth: &[Label], pred: &[Label]) -> Result<[Option<f64>; 4], MetricsError> {
    check(truth, pred)?;
    let mut hit = [0usize; 4];
    let mut all = [0usize; 4];
    for (t, p) in truth.iter().zip(pred) {
        all[t.index()] += 1;
        if t == p {
            hit[t.index()] += 1;
        }
    }
    Ok(std::array::from_fn(|i| (all[i] > 0).then(|| hit[i] as f64 / all[i] as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
}

pub const TABLE_COLUMNS: [&str; 10] =
    ["Model", "TN", "FN", "TP", "FP", "Accuracy", "Precision", "Recall", "F1", "Accuracy (4-class)"];

/// One row per named report, percentages at two decimals.
pub fn render_table(reports: &[(&str, &ConfusionReport)], format: TableFormat) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|(name, r)| {
            let b = r.binary();
            vec![
                name.to_string(),
                b.tn.to_string(),
                b.fn_.to_string(),
                b.tp.to_string(),
                b.fp.to_string(),
                format!("{:.2}", b.accuracy()),
                format!("{:.2}", b.precision()),
                format!("{:.2}", b.recall()),
                format!("{:.2}", b.f1()),
                format!("{:.2}", r.multiclass_accuracy()),
            ]
        })
        .collect();
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(TABLE_COLUMNS).expect("in-memory write");
            for r in &rows {
                w.write_record(r).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
        }
        TableFormat::Text => {
            let widths: Vec<usize> = (0..TABLE_COLUMNS.len())
                .map(|c| rows.iter().map(|r| r[c].len()).chain([TABLE_COLUMNS[c].len()]).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            let line = |out: &mut String, cells: &[&str]| {
                for (c, cell) in cells.iter().enumerate() {
                    if c == 0 {
                        let _ = write!(out, "{cell:<w$}", w = widths[c]);
                    } else {
                        let _ = write!(out, "  {cell:>w$}", w = widths[c]);
                    }
                }
                out.push('\n');
            };
            line(&mut out, &TABLE_COLUMNS);
            for r in &rows {
                let cells: Vec<&str> = r.iter().map(String::as_str).collect();
                line(&mut out, &cells);
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_class_examples() {
        let truth = vec![Label::Xss; 10];
        let mut pred = vec![Label::Xss; 6];
        pred.extend([Label::Sqli; 3]);
        pred.push(Label::Safe);
        let pc = per_class_correct(&truth, &pred).unwrap();
        assert_eq!(pc[1], Some(0.6));
        assert_eq!(pc[0], None);
        let all: Vec<Label> = Label::ALL.iter().flat_map(|&l| [l, l]).collect();
        let safe = vec![Label::Safe; all.len()];
        assert_eq!(per_class_correct(&all, &safe).unwrap(), [Some(1.0), Some(0.0), Some(0.0), Some(0.0)]);
        assert_eq!(per_class_correct(&all, &all).unwrap(), [Some(1.0); 4]);
    }

    #[test]
    fn errors() {
        assert_eq!(confusion(&[Label::Safe], &[]), Err(MetricsError::LengthMismatch { truth: 1, pred: 0 }));
        assert_eq!(confusion(&[], &[]), Err(MetricsError::Empty));
    }

    #[test]
    fn zero_denominators_render_as_zero() {
        let r = confusion(&[Label::Safe], &[Label::Safe]).unwrap();
        assert_eq!(r.precision(), 0.0);
        let t = render_table(&[("m", &r)], TableFormat::Csv);
        assert_eq!(t.lines().nth(1).unwrap(), "m,1,0,0,0,100.00,0.00,0.00,0.00,100.00");
    }
}
