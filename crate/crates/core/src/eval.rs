//! Micro/macro F1 and confusion matrices.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_id: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub num_documents: usize,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Scores `predicted` against `gold` over `num_classes` classes. Classes
/// absent from both sides are left out of the macro average.
pub fn evaluate(predicted: &[usize], gold: &[usize], num_classes: usize) -> Result<EvalReport> {
    if predicted.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} gold labels",
            predicted.len(),
            gold.len()
        )));
    }
    let k = predicted
        .iter()
        .chain(gold)
        .map(|&c| c + 1)
        .max()
        .unwrap_or(0)
        .max(num_classes);
    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &g) in predicted.iter().zip(gold) {
        confusion[g][p] += 1;
    }

    let mut per_class = Vec::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0u64, 0u64, 0u64);
    for c in 0..k {
        let tp = confusion[c][c];
        let gold_c: u64 = confusion[c].iter().sum();
        let pred_c: u64 = confusion.iter().map(|row| row[c]).sum();
        tp_all += tp;
        fp_all += pred_c - tp;
        fn_all += gold_c - tp;
        if gold_c == 0 && pred_c == 0 {
            if c < num_classes {
                warn!("class {c} absent from both gold and predictions; excluded from macro-F1");
            }
            continue;
        }
        let precision = ratio(tp, pred_c);
        let recall = ratio(tp, gold_c);
        per_class.push(ClassMetrics {
            class_id: c,
            precision,
            recall,
            f1: f1(precision, recall),
            support: gold_c,
        });
    }
    let micro = f1(
        ratio(tp_all, tp_all + fp_all),
        ratio(tp_all, tp_all + fn_all),
    );
    let macro_f1 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|m| m.f1).sum::<f64>() / per_class.len() as f64
    };
    Ok(EvalReport {
        micro_f1: micro,
        macro_f1,
        accuracy: ratio(tp_all, gold.len() as u64),
        num_documents: gold.len(),
        per_class,
        confusion,
    })
}
