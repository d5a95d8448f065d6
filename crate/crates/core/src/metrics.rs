//! Confusion matrices and precision / recall / F1 reports.
//!
//! Rows of the confusion matrix are true classes, columns are predictions.
//! Any 0/0 ratio is reported as 0 and recorded in [`EvalReport::undefined`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub type ConfusionMatrix = Vec<Vec<u64>>;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted mean over classes; the headline numbers.
    #[cfg_attr(feature = "serde", serde(rename = "macro"))]
    pub macro_avg: Averages,
    /// Support-weighted mean, for comparison.
    #[cfg_attr(feature = "serde", serde(rename = "weighted"))]
    pub weighted_avg: Averages,
    /// Human-readable notes for every ratio that was 0/0.
    pub undefined: Vec<String>,
}

impl EvalReport {
    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

pub fn confusion_matrix(
    true_idx: &[usize],
    pred_idx: &[usize],
    num_classes: usize,
) -> Result<ConfusionMatrix> {
    if true_idx.len() != pred_idx.len() {
        return Err(Error::Validation(format!(
            "{} true labels but {} predictions",
            true_idx.len(),
            pred_idx.len()
        )));
    }
    let mut m = vec![vec![0u64; num_classes]; num_classes];
    for (&t, &p) in true_idx.iter().zip(pred_idx) {
        if t >= num_classes || p >= num_classes {
            return Err(Error::Validation(format!(
                "class index ({t}, {p}) out of range for {num_classes} classes"
            )));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn classification_report(
    confusion: &ConfusionMatrix,
    class_names: &[String],
) -> Result<EvalReport> {
    let c = confusion.len();
    if confusion.iter().any(|row| row.len() != c) {
        return Err(Error::Validation("confusion matrix is not square".into()));
    }
    if class_names.len() != c {
        return Err(Error::Validation(format!(
            "{c}x{c} confusion matrix but {} class names",
            class_names.len()
        )));
    }
    let total: u64 = confusion.iter().flatten().sum();
    let trace: u64 = (0..c).map(|i| confusion[i][i]).sum();
    let mut undefined = Vec::new();

    let accuracy = ratio(trace, total).unwrap_or_else(|| {
        undefined.push(String::from("accuracy: no samples"));
        0.0
    });

    let mut per_class = Vec::with_capacity(c);
    for k in 0..c {
        let tp = confusion[k][k];
        let support: u64 = confusion[k].iter().sum();
        let predicted: u64 = confusion.iter().map(|row| row[k]).sum();
        let precision = ratio(tp, predicted).unwrap_or_else(|| {
            undefined.push(format!(
                "precision[{}]: class never predicted",
                class_names[k]
            ));
            0.0
        });
        let recall = ratio(tp, support).unwrap_or_else(|| {
            undefined.push(format!("recall[{}]: class has no support", class_names[k]));
            0.0
        });
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1: harmonic(precision, recall),
            support,
        });
    }

    let mean = |f: fn(&ClassMetrics) -> f64| {
        if c == 0 {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / c as f64
        }
    };
    let macro_avg = Averages {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
    };
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            per_class
                .iter()
                .map(|m| f(m) * m.support as f64)
                .sum::<f64>()
                / total as f64
        }
    };
    let weighted_avg = Averages {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
    };

    Ok(EvalReport {
        class_names: class_names.to_vec(),
        confusion: confusion.clone(),
        accuracy,
        per_class,
        macro_avg,
        weighted_avg,
        undefined,
    })
}

/// Aligned per-class table followed by the confusion grid.
impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name_w = self
            .class_names
            .iter()
            .map(|n| n.chars().count())
            .chain([12])
            .max()
            .unwrap_or(12);
        writeln!(
            f,
            "{:<name_w$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "class", "precision", "recall", "f1", "support"
        )?;
        for (name, m) in self.class_names.iter().zip(&self.per_class) {
            writeln!(
                f,
                "{name:<name_w$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}",
                m.precision, m.recall, m.f1, m.support
            )?;
        }
        writeln!(f)?;
        let total = self.total();
        for (label, a) in [
            ("macro avg", &self.macro_avg),
            ("weighted avg", &self.weighted_avg),
        ] {
            writeln!(
                f,
                "{label:<name_w$}  {:>9.4}  {:>9.4}  {:>9.4}  {total:>9}",
                a.precision, a.recall, a.f1
            )?;
        }
        writeln!(
            f,
            "{:<name_w$}  {:>9.4}  {:>9}  {:>9}  {total:>9}",
            "accuracy", self.accuracy, "", ""
        )?;

        writeln!(f)?;
        writeln!(f, "confusion (rows = true, columns = predicted):")?;
        let cell_w = self
            .confusion
            .iter()
            .flatten()
            .map(|v| format!("{v}").len())
            .chain([1])
            .max()
            .unwrap_or(1);
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            write!(f, "{name:<name_w$}")?;
            for v in row {
                write!(f, "  {v:>cell_w$}")?;
            }
            writeln!(f)?;
        }
        for note in &self.undefined {
            writeln!(f, "note: {note} (reported as 0)")?;
        }
        Ok(())
    }
}
