//! On-disk formats for intermediate pipeline artifacts.
//!
//! Matrices use the corpus float encoding: `u32 rows`, `u32 cols`, then
//! `rows x cols` little-endian binary32 values, row-major.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::alignment::AlignmentResult;
use crate::error::{Error, Result};

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + 4 * m.len());
    bytes.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            bytes.extend_from_slice(&(m[(i, j)] as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::format(path, 0, "matrix header truncated"));
    }
    let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + 4 * rows * cols;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            bytes.len().min(expected) as u64,
            format!(
                "expected {expected} bytes for a {rows}x{cols} matrix, found {}",
                bytes.len()
            ),
        ));
    }
    let values: Vec<f64> = bytes[8..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "non-finite value in {}",
            path.display()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// One integer per line.
pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut offset = 0u64;
    let mut labels = Vec::new();
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if !t.is_empty() {
            labels.push(
                t.parse()
                    .map_err(|_| Error::format(path, offset, "label is not an integer"))?,
            );
        }
        offset += line.len() as u64;
    }
    Ok(labels)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}

/// `doc_index,class_id,confidence,p_0,...,p_{k-1}`.
pub fn alignment_to_csv(result: &AlignmentResult) -> String {
    let k = result.num_classes();
    let mut out = String::from("doc_index,class_id,confidence");
    for c in 0..k {
        out.push_str(&format!(",p_{c}"));
    }
    out.push('\n');
    for i in 0..result.len() {
        out.push_str(&format!(
            "{},{},{}",
            i, result.assignment[i], result.confidence[i]
        ));
        for c in 0..k {
            out.push_str(&format!(",{}", result.posterior[(i, c)]));
        }
        out.push('\n');
    }
    out
}

pub fn alignment_from_csv(text: &str) -> Result<AlignmentResult> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Validation("empty alignment file".into()))?;
    let k = header.split(',').count().saturating_sub(3);
    let mut assignment = Vec::new();
    let mut confidence = Vec::new();
    let mut posterior = Vec::new();
    for (i, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        let bad = || Error::Validation(format!("bad alignment row {}", i + 1));
        if parts.len() != 3 + k || parts[0].parse::<usize>().ok() != Some(i) {
            return Err(bad());
        }
        assignment.push(parts[1].parse::<usize>().map_err(|_| bad())?);
        confidence.push(parts[2].parse::<f64>().map_err(|_| bad())?);
        for p in &parts[3..] {
            posterior.push(p.parse::<f64>().map_err(|_| bad())?);
        }
    }
    Ok(AlignmentResult {
        posterior: DMatrix::from_row_slice(assignment.len(), k, &posterior),
        assignment,
        confidence,
    })
}
