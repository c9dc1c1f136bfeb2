//! Helpers shared by the integration test targets. Oracles here avoid the
//! library's own numerics.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakcls_core::corpus::{StaticRepTable, WordId};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller keeps the helpers free of the distribution crate.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| gaussian(rng)).collect()
}

/// Table over ids `0..words` with Gaussian vectors and counts in `1..=20`.
pub fn random_table(rng: &mut impl Rng, words: usize, dim: usize) -> StaticRepTable {
    let entries: Vec<(WordId, Vec<f64>, u64)> = (0..words)
        .map(|w| {
            (
                w as WordId,
                random_vector(rng, dim),
                rng.random_range(1..=20),
            )
        })
        .collect();
    StaticRepTable::from_entries(dim, words, &entries).unwrap()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        -1.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Sample covariance (divisor n-1) of the rows of `data`.
pub fn covariance(data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = data.len();
    let d = data[0].len();
    let mut mean = vec![0.0; d];
    for row in data {
        for j in 0..d {
            mean[j] += row[j] / n as f64;
        }
    }
    let mut c = vec![vec![0.0; d]; d];
    for row in data {
        for a in 0..d {
            for b in 0..d {
                c[a][b] += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    let denom = (n - 1).max(1) as f64;
    c.iter_mut().flatten().for_each(|x| *x /= denom);
    c
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// 1-based ranks by descending score, ties by position, via pairwise counting.
pub fn ranks_by_counting(scores: &[f64]) -> Vec<u64> {
    (0..scores.len())
        .map(|i| {
            let ahead = (0..scores.len())
                .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
                .count();
            ahead as u64 + 1
        })
        .collect()
}

pub fn accuracy(pred: &[usize], gold: &[usize]) -> f64 {
    pred.iter().zip(gold).filter(|(a, b)| a == b).count() as f64 / gold.len() as f64
}
