//! Confusion counts and per-class / weighted metrics for binary relations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// `counts[gold][pred]`, indexed by [`Label::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn get(&self, gold: Label, pred: Label) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: Label) -> u64 {
        self.counts[class.index()].iter().sum()
    }
}

pub fn confusion(preds: &[Label], golds: &[Label]) -> Result<ConfusionMatrix> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: golds.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (p, g) in preds.iter().zip(golds) {
        cm.counts[g.index()][p.index()] += 1;
    }
    Ok(cm)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// F1 from precision and recall, 0 when both are 0.
pub fn f1_score(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

pub fn class_prf(cm: &ConfusionMatrix, class: Label) -> ClassMetrics {
    let other = Label::from_index(1 - class.index());
    let tp = cm.get(class, class) as f64;
    let fp = cm.get(other, class) as f64;
    let fn_ = cm.get(class, other) as f64;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    ClassMetrics { precision, recall, f1: f1_score(precision, recall), support: cm.support(class) }
}

/// Support-weighted mean of per-class F1 given each class's
/// `(precision, recall, support)`.
pub fn weighted_f1(classes: &[(f64, f64, u64)]) -> Result<f64> {
    let total: u64 = classes.iter().map(|c| c.2).sum();
    if total == 0 {
        return Err(Error::InvalidParameter("weighted F1 needs a positive total support".into()));
    }
    Ok(classes.iter().map(|&(p, r, s)| s as f64 / total as f64 * f1_score(p, r)).sum())
}

pub fn macro_f1(classes: &[(f64, f64)]) -> f64 {
    if classes.is_empty() {
        return 0.0;
    }
    classes.iter().map(|&(p, r)| f1_score(p, r)).sum::<f64>() / classes.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub p_true: f64,
    pub r_true: f64,
    pub f1_true: f64,
    pub p_false: f64,
    pub r_false: f64,
    pub f1_false: f64,
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub support_true: u64,
    pub support_false: u64,
}

impl EvaluationReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let t = class_prf(cm, Label::True);
        let f = class_prf(cm, Label::False);
        Ok(Self {
            p_true: t.precision,
            r_true: t.recall,
            f1_true: t.f1,
            p_false: f.precision,
            r_false: f.recall,
            f1_false: f.f1,
            weighted_f1: weighted_f1(&[(t.precision, t.recall, t.support), (f.precision, f.recall, f.support)])?,
            macro_f1: macro_f1(&[(t.precision, t.recall), (f.precision, f.recall)]),
            support_true: t.support,
            support_false: f.support,
        })
    }

    pub fn from_predictions(preds: &[Label], golds: &[Label]) -> Result<Self> {
        Self::from_confusion(&confusion(preds, golds)?)
    }

    /// Classes whose precision or recall fell back to 0 because of a 0/0.
    pub fn undefined_notes(&self, cm: &ConfusionMatrix) -> Vec<String> {
        let mut notes = Vec::new();
        for class in [Label::True, Label::False] {
            let other = Label::from_index(1 - class.index());
            if cm.get(class, class) + cm.get(other, class) == 0 {
                notes.push(format!("precision of {class:?} is 0/0, reported as 0"));
            }
            if cm.support(class) == 0 {
                notes.push(format!("recall of {class:?} is 0/0, reported as 0"));
            }
        }
        notes
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8}{:>10}{:>10}{:>10}{:>10}", "class", "precision", "recall", "f1", "support")?;
        writeln!(
            f,
            "{:<8}{:>10.4}{:>10.4}{:>10.4}{:>10}",
            "TRUE", self.p_true, self.r_true, self.f1_true, self.support_true
        )?;
        writeln!(
            f,
            "{:<8}{:>10.4}{:>10.4}{:>10.4}{:>10}",
            "FALSE", self.p_false, self.r_false, self.f1_false, self.support_false
        )?;
        writeln!(f, "weighted F1 {:.4}", self.weighted_f1)?;
        write!(f, "macro F1    {:.4}", self.macro_f1)
    }
}
