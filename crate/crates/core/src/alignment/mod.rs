//! Document-to-class alignment.
//!
//! Documents first get a prior label from their nearest class by cosine. The
//! prior seeds a clustering (tied-covariance GMM by default) whose cluster `j`
//! stays bound to class `j` throughout, so no relabeling step is needed.

mod gmm;
mod kmeans;
mod pca;

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::vector::{cosine, norm};

pub use gmm::{gmm_align, GmmConfig, GmmFit, GmmState};
pub use kmeans::kmeans_align;
pub use pca::{reduce_dimensions, Pca};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorLabels {
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Documents whose representation had zero norm.
    pub degenerate: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub assignment: Vec<usize>,
    /// `n x k` responsibilities, rows sum to one.
    pub posterior: DMatrix<f64>,
    pub confidence: Vec<f64>,
}

impl AlignmentResult {
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.posterior.ncols()
    }

    /// One-hot posteriors for hard labels with separately supplied confidences.
    pub fn hard(labels: &[usize], k: usize, confidence: Vec<f64>) -> Self {
        let posterior = DMatrix::from_fn(
            labels.len(),
            k,
            |i, j| if labels[i] == j { 1.0 } else { 0.0 },
        );
        Self {
            assignment: labels.to_vec(),
            posterior,
            confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterMethod {
    #[default]
    Gmm,
    KMeans,
    /// Keep the prior labels.
    None,
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm" => Ok(ClusterMethod::Gmm),
            "kmeans" => Ok(ClusterMethod::KMeans),
            "none" => Ok(ClusterMethod::None),
            other => Err(Error::InvalidArgument(format!(
                "unknown cluster method '{other}'"
            ))),
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterMethod::Gmm => "gmm",
            ClusterMethod::KMeans => "kmeans",
            ClusterMethod::None => "none",
        })
    }
}

/// Index of the best score, lowest index on ties.
pub(crate) fn argmax(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Nearest class by cosine for every document row.
pub fn prior_labels(doc_reps: &DMatrix<f64>, class_reps: &[Vec<f64>]) -> Result<PriorLabels> {
    let k = class_reps.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "prior labels need at least 2 classes, got {k}"
        )));
    }
    let mut labels = Vec::with_capacity(doc_reps.nrows());
    let mut degenerate = Vec::new();
    for i in 0..doc_reps.nrows() {
        let row: Vec<f64> = doc_reps.row(i).iter().copied().collect();
        if norm(&row) == 0.0 {
            warn!("document {i} has a zero representation; assigned to class 0");
            degenerate.push(i);
        }
        labels.push(argmax(
            class_reps.iter().map(|c| cosine(&row, c).unwrap_or(-1.0)),
        ));
    }
    Ok(PriorLabels {
        labels,
        num_classes: k,
        degenerate,
    })
}

/// Cosine of each document to its prior class, used as a confidence when no
/// clustering runs.
pub fn prior_confidence(
    doc_reps: &DMatrix<f64>,
    class_reps: &[Vec<f64>],
    prior: &PriorLabels,
) -> Vec<f64> {
    (0..doc_reps.nrows())
        .map(|i| {
            let row: Vec<f64> = doc_reps.row(i).iter().copied().collect();
            cosine(&row, &class_reps[prior.labels[i]]).unwrap_or(-1.0)
        })
        .collect()
}
