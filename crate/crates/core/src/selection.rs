//! Confident pseudo-label selection.

use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::alignment::AlignmentResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMode {
    /// Top fraction within each assigned class.
    #[default]
    PerClass,
    /// Top fraction of the whole corpus.
    Global,
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-class" => Ok(SelectionMode::PerClass),
            "global" => Ok(SelectionMode::Global),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection mode '{other}'"
            ))),
        }
    }
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::PerClass => "per-class",
            SelectionMode::Global => "global",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoLabel {
    pub doc: usize,
    pub class: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelSet {
    /// Sorted by document index.
    pub labels: Vec<PseudoLabel>,
    pub delta: f64,
    pub num_classes: usize,
}

impl PseudoLabelSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `doc_index,class_id,confidence` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("doc_index,class_id,confidence\n");
        for l in &self.labels {
            out.push_str(&format!("{},{},{}\n", l.doc, l.class, l.confidence));
        }
        out
    }

    pub fn from_csv(text: &str, num_classes: usize) -> Result<Self> {
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.starts_with("doc_index") || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || Error::Validation(format!("bad pseudo-label line {}: '{line}'", i + 1));
            if parts.len() != 3 {
                return Err(bad());
            }
            labels.push(PseudoLabel {
                doc: parts[0].trim().parse().map_err(|_| bad())?,
                class: parts[1].trim().parse().map_err(|_| bad())?,
                confidence: parts[2].trim().parse().map_err(|_| bad())?,
            });
        }
        Ok(Self {
            labels,
            delta: f64::NAN,
            num_classes,
        })
    }
}

/// `ceil(delta * n)`, tolerant of representation error in `delta * n`.
fn keep_count(delta: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let raw = (delta * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

fn by_confidence_desc(
    result: &AlignmentResult,
) -> impl Fn(&usize, &usize) -> std::cmp::Ordering + '_ {
    move |&a, &b| {
        result.confidence[b]
            .total_cmp(&result.confidence[a])
            .then(a.cmp(&b))
    }
}

pub fn select_confident(
    result: &AlignmentResult,
    delta: f64,
    mode: SelectionMode,
) -> Result<PseudoLabelSet> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be in (0, 1], got {delta}"
        )));
    }
    let k = result.num_classes();
    let mut chosen: Vec<usize> = Vec::new();
    match mode {
        SelectionMode::PerClass => {
            for c in 0..k {
                let mut members: Vec<usize> = (0..result.len())
                    .filter(|&i| result.assignment[i] == c)
                    .collect();
                if members.is_empty() {
                    warn!("class {c} has no assigned documents; it contributes no pseudo-labels");
                    continue;
                }
                members.sort_by(by_confidence_desc(result));
                chosen.extend_from_slice(&members[..keep_count(delta, members.len())]);
            }
        }
        SelectionMode::Global => {
            let mut all: Vec<usize> = (0..result.len()).collect();
            all.sort_by(by_confidence_desc(result));
            chosen.extend_from_slice(&all[..keep_count(delta, all.len())]);
        }
    }
    chosen.sort_unstable();
    Ok(PseudoLabelSet {
        labels: chosen
            .into_iter()
            .map(|i| PseudoLabel {
                doc: i,
                class: result.assignment[i],
                confidence: result.confidence[i],
            })
            .collect(),
        delta,
        num_classes: k,
    })
}
