use log::warn;
use nalgebra::{DMatrix, DVector};

use super::{AlignmentResult, PriorLabels};
use crate::error::{Error, Result};

fn nearest(row: &DVector<f64>, centroids: &[DVector<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = (row - m).norm_squared();
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd iterations starting from the per-class means of the prior labels.
///
/// Posteriors are one-hot. Confidence ranks every document by distance to its
/// centroid: the closest gets 1, the farthest `1/n`.
pub fn kmeans_align(
    data: &DMatrix<f64>,
    prior: &PriorLabels,
    fallback_means: Option<&DMatrix<f64>>,
    max_iters: usize,
) -> Result<AlignmentResult> {
    let (n, p) = data.shape();
    let k = prior.num_classes;
    if n == 0 || k == 0 || prior.labels.len() != n {
        return Err(Error::InvalidArgument(
            "k-means needs documents, classes and one prior label per document".into(),
        ));
    }
    let rows: Vec<DVector<f64>> = (0..n).map(|i| data.row(i).transpose()).collect();

    let mut centroids = vec![DVector::zeros(p); k];
    let mut counts = vec![0usize; k];
    for (i, &l) in prior.labels.iter().enumerate() {
        if l >= k {
            return Err(Error::InvalidArgument(format!(
                "prior label {l} out of range for {k} classes"
            )));
        }
        centroids[l] += &rows[i];
        counts[l] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            centroids[c] /= counts[c] as f64;
        } else if let Some(f) = fallback_means.filter(|f| f.nrows() == k && f.ncols() == p) {
            centroids[c] = f.row(c).transpose();
        } else {
            warn!("class {c} has no prior document and no fallback; seeding at the origin");
        }
    }

    let mut assign: Vec<(usize, f64)> = rows.iter().map(|r| nearest(r, &centroids)).collect();
    for _ in 0..max_iters {
        let mut sums = vec![DVector::zeros(p); k];
        let mut counts = vec![0usize; k];
        for (i, &(c, _)) in assign.iter().enumerate() {
            sums[c] += &rows[i];
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = &sums[c] / counts[c] as f64;
            } else {
                // Reseed from the point farthest from its own centroid.
                let far = (0..n)
                    .max_by(|&a, &b| assign[a].1.total_cmp(&assign[b].1).then(b.cmp(&a)))
                    .unwrap();
                warn!("k-means cluster {c} emptied; reseeding from document {far}");
                centroids[c] = rows[far].clone();
                assign[far] = (c, 0.0);
            }
        }
        let next: Vec<(usize, f64)> = rows.iter().map(|r| nearest(r, &centroids)).collect();
        let stable = next.iter().zip(&assign).all(|(a, b)| a.0 == b.0);
        assign = next;
        if stable {
            break;
        }
    }

    let labels: Vec<usize> = assign.iter().map(|a| a.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| assign[a].1.total_cmp(&assign[b].1).then(a.cmp(&b)));
    let mut confidence = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        confidence[i] = (n - rank) as f64 / n as f64;
    }
    Ok(AlignmentResult::hard(&labels, k, confidence))
}
