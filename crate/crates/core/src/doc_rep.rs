//! Class-oriented document representations.
//!
//! Every token is scored by up to four attention mechanisms, the per-mechanism
//! rankings are fused by geometric mean of ranks, and the token at fused rank
//! `r` gets weight `1/r` in the document average.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::corpus::{Document, EmbeddedCorpus, StaticRepTable};
use crate::error::{Error, Result};
use crate::vector::{cosine_with_norm, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttentionKind {
    /// Maximum similarity to any single class.
    Significance,
    /// Similarity to the mean of all classes.
    Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenRep {
    Contextualized,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mechanism {
    pub kind: AttentionKind,
    pub rep: TokenRep,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism {
            kind: AttentionKind::Significance,
            rep: TokenRep::Contextualized,
        },
        Mechanism {
            kind: AttentionKind::Significance,
            rep: TokenRep::Static,
        },
        Mechanism {
            kind: AttentionKind::Relation,
            rep: TokenRep::Contextualized,
        },
        Mechanism {
            kind: AttentionKind::Relation,
            rep: TokenRep::Static,
        },
    ];
}

/// Which mechanisms weight the tokens. `Uniform` is the plain token average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AttentionMode {
    #[default]
    Mixture,
    SigCtx,
    SigStatic,
    RelCtx,
    RelStatic,
    Uniform,
}

impl AttentionMode {
    pub fn mechanisms(self) -> &'static [Mechanism] {
        match self {
            AttentionMode::Mixture => &Mechanism::ALL,
            AttentionMode::SigCtx => &Mechanism::ALL[0..1],
            AttentionMode::SigStatic => &Mechanism::ALL[1..2],
            AttentionMode::RelCtx => &Mechanism::ALL[2..3],
            AttentionMode::RelStatic => &Mechanism::ALL[3..4],
            AttentionMode::Uniform => &[],
        }
    }
}

impl FromStr for AttentionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mixture" => AttentionMode::Mixture,
            "sig-ctx" => AttentionMode::SigCtx,
            "sig-static" => AttentionMode::SigStatic,
            "rel-ctx" => AttentionMode::RelCtx,
            "rel-static" => AttentionMode::RelStatic,
            "none" => AttentionMode::Uniform,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown attention mode '{other}'"
                )))
            }
        })
    }
}

impl fmt::Display for AttentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionMode::Mixture => "mixture",
            AttentionMode::SigCtx => "sig-ctx",
            AttentionMode::SigStatic => "sig-static",
            AttentionMode::RelCtx => "rel-ctx",
            AttentionMode::RelStatic => "rel-static",
            AttentionMode::Uniform => "none",
        })
    }
}

/// Class vectors with cached norms plus their mean, shared by every document.
pub struct ClassReps {
    reps: Vec<Vec<f64>>,
    norms: Vec<f64>,
    mean: Vec<f64>,
    mean_norm: f64,
}

impl ClassReps {
    pub fn new(reps: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = reps.first() else {
            return Err(Error::InvalidArgument(
                "at least one class representation required".into(),
            ));
        };
        let dim = first.len();
        if reps.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(
                "class representations differ in length".into(),
            ));
        }
        let norms = reps.iter().map(|r| norm(r)).collect();
        let mean = crate::vector::mean_of(reps.iter().map(Vec::as_slice), dim);
        let mean_norm = norm(&mean);
        Ok(Self {
            reps,
            norms,
            mean,
            mean_norm,
        })
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn reps(&self) -> &[Vec<f64>] {
        &self.reps
    }

    fn score(&self, e: &[f64], kind: AttentionKind) -> f64 {
        let e_norm = norm(e);
        match kind {
            AttentionKind::Significance => self
                .reps
                .iter()
                .zip(&self.norms)
                .map(|(x, &xn)| cosine_with_norm(e, e_norm, x, xn).unwrap_or(-1.0))
                .fold(f64::NEG_INFINITY, f64::max),
            AttentionKind::Relation => {
                cosine_with_norm(e, e_norm, &self.mean, self.mean_norm).unwrap_or(-1.0)
            }
        }
    }
}

/// One score per token position. Zero-norm tokens score -1.
pub fn attention_scores(
    doc: &Document,
    table: &StaticRepTable,
    classes: &ClassReps,
    mechanism: Mechanism,
) -> Vec<f64> {
    let mut buf = Vec::with_capacity(table.dim());
    doc.tokens()
        .map(|(w, t)| match mechanism.rep {
            TokenRep::Contextualized => {
                buf.clear();
                buf.extend(t.iter().map(|&x| f64::from(x)));
                classes.score(&buf, mechanism.kind)
            }
            TokenRep::Static => match table.rep(w) {
                Some(s) => classes.score(s, mechanism.kind),
                None => -1.0,
            },
        })
        .collect()
}

/// 1-based rank of each position by descending score, ties by position.
pub fn ranks_from_scores(scores: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0u64; scores.len()];
    for (r, &pos) in order.iter().enumerate() {
        ranks[pos] = r as u64 + 1;
    }
    ranks
}

/// Fuses per-mechanism ranks into one ordering of token positions, best
/// first: ascending product of ranks, ties by position.
///
/// Products are compared exactly in `u128`; only if a product overflows does
/// the comparison fall back to summed logarithms.
pub fn fuse_ranks(rank_lists: &[Vec<u64>]) -> Result<Vec<usize>> {
    let Some(first) = rank_lists.first() else {
        return Err(Error::InvalidArgument("no rank lists to fuse".into()));
    };
    let len = first.len();
    if rank_lists.iter().any(|r| r.len() != len) {
        return Err(Error::InvalidArgument("rank lists differ in length".into()));
    }
    let exact: Option<Vec<u128>> = (0..len)
        .map(|j| {
            rank_lists
                .iter()
                .try_fold(1u128, |acc, r| acc.checked_mul(u128::from(r[j])))
        })
        .collect();

    let mut order: Vec<usize> = (0..len).collect();
    match exact {
        Some(products) => order.sort_by(|&a, &b| products[a].cmp(&products[b]).then(a.cmp(&b))),
        None => {
            let logs: Vec<f64> = (0..len)
                .map(|j| rank_lists.iter().map(|r| (r[j] as f64).ln()).sum())
                .collect();
            order.sort_by(|&a, &b| logs[a].total_cmp(&logs[b]).then(a.cmp(&b)));
        }
    }
    Ok(order)
}

/// Document vector plus the normalized weight of every token.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDocument {
    pub vector: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Token weights before normalization: `1/r` at fused rank `r`, or all ones
/// when no mechanism is enabled.
pub fn token_weights(
    doc: &Document,
    table: &StaticRepTable,
    classes: &ClassReps,
    mode: AttentionMode,
) -> Result<Vec<f64>> {
    let mechanisms = mode.mechanisms();
    if mechanisms.is_empty() {
        return Ok(vec![1.0; doc.len()]);
    }
    let ranks: Vec<Vec<u64>> = mechanisms
        .iter()
        .map(|&m| ranks_from_scores(&attention_scores(doc, table, classes, m)))
        .collect();
    let order = fuse_ranks(&ranks)?;
    let mut weights = vec![0.0; doc.len()];
    for (r, &pos) in order.iter().enumerate() {
        weights[pos] = 1.0 / (r + 1) as f64;
    }
    Ok(weights)
}

pub fn document_representation(
    doc: &Document,
    table: &StaticRepTable,
    classes: &ClassReps,
    mode: AttentionMode,
) -> Result<WeightedDocument> {
    let raw = token_weights(doc, table, classes, mode)?;
    let total: f64 = raw.iter().sum();
    let mut vector = vec![0.0; table.dim()];
    for ((_, t), &a) in doc.tokens().zip(&raw) {
        vector
            .iter_mut()
            .zip(t)
            .for_each(|(v, &x)| *v += a * f64::from(x));
    }
    vector.iter_mut().for_each(|v| *v /= total);
    let weights = raw.iter().map(|a| a / total).collect();
    Ok(WeightedDocument { vector, weights })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentReps {
    /// `n x dim`, one row per document.
    pub matrix: DMatrix<f64>,
    pub token_weights: Vec<Vec<f64>>,
}

impl DocumentReps {
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }
}

/// Represents every document; parallel over documents, order preserved.
pub fn represent_documents(
    corpus: &EmbeddedCorpus,
    table: &StaticRepTable,
    classes: &ClassReps,
    mode: AttentionMode,
) -> Result<DocumentReps> {
    let docs: Vec<WeightedDocument> = corpus
        .docs()
        .par_iter()
        .map(|d| document_representation(d, table, classes, mode))
        .collect::<Result<_>>()?;
    let dim = corpus.dim();
    let matrix = DMatrix::from_fn(docs.len(), dim, |i, j| docs[i].vector[j]);
    Ok(DocumentReps {
        matrix,
        token_weights: docs.into_iter().map(|d| d.weights).collect(),
    })
}
