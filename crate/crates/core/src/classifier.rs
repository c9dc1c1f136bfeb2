//! Multinomial logistic regression trained on pseudo-labels.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::alignment::argmax;
use crate::error::{Error, Result};
use crate::selection::PseudoLabelSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    /// L2 penalty on the non-bias weights.
    pub l2: f64,
    pub iterations: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            iterations: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub num_classes: usize,
    pub dim: usize,
    /// Feature standardization fitted on the training rows.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Row-major `num_classes x (dim + 1)`; the last column is the bias.
    pub weights: Vec<f64>,
}

fn design(features: &DMatrix<f64>, rows: &[usize], mean: &[f64], scale: &[f64]) -> DMatrix<f64> {
    let d = features.ncols();
    DMatrix::from_fn(rows.len(), d + 1, |r, j| {
        if j == d {
            1.0
        } else {
            (features[(rows[r], j)] - mean[j]) / scale[j]
        }
    })
}

/// Row-wise softmax of `logits` in place.
fn softmax_rows(logits: &mut DMatrix<f64>) {
    for mut row in logits.row_iter_mut() {
        let max = row.max();
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let s = row.sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
}

impl LinearClassifier {
    fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.num_classes, self.dim + 1, &self.weights)
    }

    pub fn predict_proba(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if features.ncols() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "classifier expects {} features, got {}",
                self.dim,
                features.ncols()
            )));
        }
        let rows: Vec<usize> = (0..features.nrows()).collect();
        let x = design(features, &rows, &self.mean, &self.scale);
        let mut logits = x * self.weight_matrix().transpose();
        softmax_rows(&mut logits);
        Ok(logits)
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba(features)?;
        Ok((0..p.nrows())
            .map(|i| argmax(p.row(i).iter().copied()))
            .collect())
    }
}

/// Fits a softmax classifier on the pseudo-labelled rows of `features` by
/// accelerated gradient descent. No randomness is involved.
pub fn train_classifier(
    features: &DMatrix<f64>,
    pseudo: &PseudoLabelSet,
    config: &ClassifierConfig,
) -> Result<LinearClassifier> {
    let k = pseudo.num_classes;
    let d = features.ncols();
    if pseudo.is_empty() {
        return Err(Error::DegenerateTraining(
            "no pseudo-labelled documents".into(),
        ));
    }
    let mut present = vec![false; k];
    for l in &pseudo.labels {
        if l.doc >= features.nrows() || l.class >= k {
            return Err(Error::InvalidArgument(format!(
                "pseudo-label ({}, {}) out of range",
                l.doc, l.class
            )));
        }
        present[l.class] = true;
    }
    let distinct = present.iter().filter(|&&p| p).count();
    if distinct < 2 {
        return Err(Error::DegenerateTraining(format!(
            "pseudo-labels cover only {distinct} class"
        )));
    }
    for (c, _) in present.iter().enumerate().filter(|(_, &p)| !p) {
        warn!("class {c} has no pseudo-labelled documents");
    }

    let rows: Vec<usize> = pseudo.labels.iter().map(|l| l.doc).collect();
    let m = rows.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|&i| features[(i, j)]).sum::<f64>() / m)
        .collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let var = rows
                .iter()
                .map(|&i| (features[(i, j)] - mean[j]).powi(2))
                .sum::<f64>()
                / m;
            if var > 1e-24 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let x = design(features, &rows, &mean, &scale);
    let y = DMatrix::from_fn(rows.len(), k, |r, c| {
        if pseudo.labels[r].class == c {
            1.0
        } else {
            0.0
        }
    });

    let max_sq = x.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
    let step = 1.0 / (0.5 * max_sq + config.l2);
    let mut reg_mask = DMatrix::from_element(k, d + 1, config.l2);
    reg_mask.column_mut(d).fill(0.0);

    let gradient = |w: &DMatrix<f64>| -> DMatrix<f64> {
        let mut p = &x * w.transpose();
        softmax_rows(&mut p);
        (p - &y).transpose() * &x / m + reg_mask.component_mul(w)
    };

    let mut w = DMatrix::zeros(k, d + 1);
    let mut look = w.clone();
    let mut t = 1.0f64;
    for _ in 0..config.iterations {
        let g = gradient(&look);
        let next = &look - g * step;
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        look = &next + (&next - &w) * momentum;
        w = next;
        t = t_next;
    }

    Ok(LinearClassifier {
        num_classes: k,
        dim: d,
        mean,
        scale,
        weights: w.transpose().as_slice().to_vec(),
    })
}
