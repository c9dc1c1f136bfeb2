use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{argmax, AlignmentResult, PriorLabels};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmConfig {
    pub max_iters: usize,
    /// Relative log-likelihood change below which EM stops.
    pub tol: f64,
    /// Ridge added to the covariance each M-step, as a fraction of
    /// `trace(data covariance) / P`.
    pub reg_scale: f64,
    /// Keep a copy of the parameters after every iteration.
    pub keep_history: bool,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-4,
            reg_scale: 1e-6,
            keep_history: false,
        }
    }
}

/// Mixture parameters. `log_likelihood` is the data log-likelihood under
/// exactly these parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmState {
    pub means: Vec<DVector<f64>>,
    pub tied_covariance: DMatrix<f64>,
    pub mixing_weights: Vec<f64>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub result: AlignmentResult,
    pub state: GmmState,
    /// Log-likelihood at the initial parameters and after each M-step.
    pub log_likelihoods: Vec<f64>,
    /// The quantity EM maximizes, matching `log_likelihoods`: the
    /// log-likelihood minus `n/2 * ridge * trace(covariance^-1)`. The ridge
    /// makes each M-step the exact maximizer of this penalized form, so it
    /// never decreases; the plain log-likelihood may dip by rounding-sized
    /// amounts.
    pub objective: Vec<f64>,
    /// Parameters matching `log_likelihoods`, when requested.
    pub history: Vec<GmmState>,
    pub iterations: usize,
    pub converged: bool,
    /// Classes with no prior-assigned document.
    pub empty_classes: Vec<usize>,
}

struct Params {
    means: Vec<DVector<f64>>,
    cov: DMatrix<f64>,
    weights: Vec<f64>,
}

/// Tied-covariance EM seeded from prior labels; cluster `j` is class `j`.
///
/// `fallback_means` (`k x P`) seeds classes that received no prior document,
/// typically the class representations projected into the reduced space.
pub fn gmm_align(
    data: &DMatrix<f64>,
    prior: &PriorLabels,
    fallback_means: Option<&DMatrix<f64>>,
    config: &GmmConfig,
) -> Result<GmmFit> {
    let (n, p) = data.shape();
    let k = prior.num_classes;
    if n == 0 || p == 0 || k == 0 {
        return Err(Error::InvalidArgument(
            "GMM needs at least one document, dimension and class".into(),
        ));
    }
    if prior.labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} prior labels for {n} documents",
            prior.labels.len()
        )));
    }
    if let Some(&bad) = prior.labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidArgument(format!(
            "prior label {bad} out of range for {k} classes"
        )));
    }

    // Work on centered data; the model is translation covariant.
    let center = data.row_mean().transpose();
    let mut x = data.clone();
    for mut row in x.row_iter_mut() {
        row -= center.transpose();
    }
    let second_moment = {
        let s = x.transpose() * &x;
        (&s + s.transpose()) * 0.5
    };
    let trace = second_moment.trace() / n as f64;
    let ridge = if trace > 0.0 {
        config.reg_scale * trace / p as f64
    } else {
        config.reg_scale
    };

    let (mut params, empty_classes) = initialize(&x, prior, fallback_means, &center, ridge)?;

    let penalty = |trace_inv: f64| 0.5 * n as f64 * ridge * trace_inv;
    let (mut resp, mut ll, trace_inv) = e_step(&x, &params, 0)?;
    let mut obj = ll - penalty(trace_inv);
    let mut log_likelihoods = vec![ll];
    let mut objective = vec![obj];
    let mut history = Vec::new();
    if config.keep_history {
        history.push(snapshot(&params, &center, ll));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        params = m_step(&x, &second_moment, &resp, &params, ridge);
        iterations += 1;
        let (next_resp, next_ll, trace_inv) = e_step(&x, &params, iterations)?;
        resp = next_resp;
        ll = next_ll;
        let next_obj = ll - penalty(trace_inv);
        let change = (next_obj - obj).abs() / obj.abs().max(f64::MIN_POSITIVE);
        obj = next_obj;
        log_likelihoods.push(ll);
        objective.push(obj);
        if config.keep_history {
            history.push(snapshot(&params, &center, ll));
        }
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let assignment: Vec<usize> = (0..n)
        .map(|i| argmax(resp.row(i).iter().copied()))
        .collect();
    let confidence = assignment
        .iter()
        .enumerate()
        .map(|(i, &c)| resp[(i, c)])
        .collect();
    Ok(GmmFit {
        result: AlignmentResult {
            assignment,
            posterior: resp,
            confidence,
        },
        state: snapshot(&params, &center, ll),
        log_likelihoods,
        objective,
        history,
        iterations,
        converged,
        empty_classes,
    })
}

fn snapshot(params: &Params, center: &DVector<f64>, ll: f64) -> GmmState {
    GmmState {
        means: params.means.iter().map(|m| m + center).collect(),
        tied_covariance: params.cov.clone(),
        mixing_weights: params.weights.clone(),
        log_likelihood: ll,
    }
}

fn initialize(
    x: &DMatrix<f64>,
    prior: &PriorLabels,
    fallback_means: Option<&DMatrix<f64>>,
    center: &DVector<f64>,
    ridge: f64,
) -> Result<(Params, Vec<usize>)> {
    let (n, p) = x.shape();
    let k = prior.num_classes;
    let mut sums = vec![DVector::zeros(p); k];
    let mut counts = vec![0usize; k];
    for (i, &l) in prior.labels.iter().enumerate() {
        sums[l] += x.row(i).transpose();
        counts[l] += 1;
    }
    let mut empty = Vec::new();
    let mut means = Vec::with_capacity(k);
    for c in 0..k {
        if counts[c] > 0 {
            means.push(&sums[c] / counts[c] as f64);
        } else {
            empty.push(c);
            let m = match fallback_means {
                Some(f) if f.nrows() == k && f.ncols() == p => f.row(c).transpose() - center,
                _ => DVector::zeros(p),
            };
            warn!("class {c} has no prior-assigned document; seeding its mean from the fallback");
            means.push(m);
        }
    }

    let mut cov = DMatrix::zeros(p, p);
    for (i, &l) in prior.labels.iter().enumerate() {
        let d = x.row(i).transpose() - &means[l];
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= n as f64;
    cov = (&cov + cov.transpose()) * 0.5;
    for j in 0..p {
        cov[(j, j)] += ridge;
    }

    // Empty classes get one document's worth of mass so they can attract points.
    let raw: Vec<f64> = counts.iter().map(|&c| c.max(1) as f64).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    Ok((
        Params {
            means,
            cov,
            weights,
        },
        empty,
    ))
}

/// Responsibilities, total log-likelihood and `trace(covariance^-1)` under
/// `params`.
fn e_step(x: &DMatrix<f64>, params: &Params, iteration: usize) -> Result<(DMatrix<f64>, f64, f64)> {
    let (n, p) = x.shape();
    let k = params.means.len();
    let chol = params.cov.clone().cholesky().ok_or_else(|| {
        Error::Numeric(format!(
            "tied covariance not positive definite at iteration {iteration}"
        ))
    })?;
    let l = chol.l();
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    // Whiten: rows z = L^{-1} x.
    let whitened = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Numeric(format!("singular covariance at iteration {iteration}")))?;
    let means: Vec<DVector<f64>> = params
        .means
        .iter()
        .map(|m| {
            l.solve_lower_triangular(m)
                .unwrap_or_else(|| DVector::zeros(p))
        })
        .collect();
    let constant = -0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
    let log_weights: Vec<f64> = params.weights.iter().map(|w| w.ln()).collect();

    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let z = whitened.column(i);
            let logp: Vec<f64> = (0..k)
                .map(|c| {
                    if log_weights[c] == f64::NEG_INFINITY {
                        return f64::NEG_INFINITY;
                    }
                    let maha = (z - &means[c]).norm_squared();
                    log_weights[c] + constant - 0.5 * maha
                })
                .collect();
            let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logp.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            (logp.iter().map(|v| (v - lse).exp()).collect(), lse)
        })
        .collect();

    let ll: f64 = rows.iter().map(|r| r.1).sum();
    if !ll.is_finite() {
        return Err(Error::Numeric(format!(
            "log-likelihood is not finite at iteration {iteration}"
        )));
    }
    let resp = DMatrix::from_fn(n, k, |i, c| rows[i].0[c]);
    let trace_inv = l
        .solve_lower_triangular(&DMatrix::identity(p, p))
        .map_or(f64::INFINITY, |inv| inv.norm_squared());
    Ok((resp, ll, trace_inv))
}

fn m_step(
    x: &DMatrix<f64>,
    second_moment: &DMatrix<f64>,
    resp: &DMatrix<f64>,
    previous: &Params,
    ridge: f64,
) -> Params {
    let (n, p) = x.shape();
    let k = resp.ncols();
    let mass: Vec<f64> = (0..k).map(|c| resp.column(c).sum()).collect();
    let weighted_sums = x.transpose() * resp; // p x k

    let mut means = Vec::with_capacity(k);
    let mut cov = second_moment.clone();
    for (c, &mc) in mass.iter().enumerate() {
        if mc > 0.0 {
            let m = weighted_sums.column(c) / mc;
            cov.ger(-mc, &m, &m, 1.0);
            means.push(m);
        } else {
            means.push(previous.means[c].clone());
        }
    }
    cov /= n as f64;
    cov = (&cov + cov.transpose()) * 0.5;
    for j in 0..p {
        cov[(j, j)] += ridge;
    }
    let total: f64 = mass.iter().sum();
    let weights = mass.iter().map(|m| m / total).collect();
    Params {
        means,
        cov,
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn blobs(seed: u64, per: usize, sep: f64) -> (DMatrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2 {
            for _ in 0..per {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                rows.extend([dx + sep * c as f64, dy]);
                labels.push(c);
            }
        }
        (DMatrix::from_row_slice(2 * per, 2, &rows), labels)
    }

    #[test]
    fn separated_blobs_recovered_confidently() {
        let (data, labels) = blobs(1, 50, 20.0);
        let prior = PriorLabels {
            labels: labels.clone(),
            num_classes: 2,
            degenerate: vec![],
        };
        let fit = gmm_align(&data, &prior, None, &GmmConfig::default()).unwrap();
        assert_eq!(fit.result.assignment, labels);
        assert!(fit.result.confidence.iter().all(|&c| c > 0.99));
    }

    #[test]
    fn single_component_posteriors_are_one() {
        let (data, _) = blobs(2, 10, 3.0);
        let prior = PriorLabels {
            labels: vec![0; 20],
            num_classes: 1,
            degenerate: vec![],
        };
        let fit = gmm_align(&data, &prior, None, &GmmConfig::default()).unwrap();
        assert!(fit.result.posterior.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn empty_class_uses_fallback_mean() {
        let (data, _) = blobs(3, 30, 15.0);
        let prior = PriorLabels {
            labels: vec![0; 60],
            num_classes: 2,
            degenerate: vec![],
        };
        let fallback = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 15.0, 0.0]);
        let cfg = GmmConfig {
            max_iters: 0,
            ..GmmConfig::default()
        };
        let fit = gmm_align(&data, &prior, Some(&fallback), &cfg).unwrap();
        assert_eq!(fit.empty_classes, vec![1]);
        assert!(
            (fit.state.means[1][0] - 15.0).abs() < 1e-12 && fit.state.means[1][1].abs() < 1e-12
        );
        assert!(fit.state.mixing_weights[1] > 0.0);
    }

    #[test]
    fn zero_iterations_keeps_prior_parameters() {
        let (data, labels) = blobs(4, 20, 6.0);
        let prior = PriorLabels {
            labels,
            num_classes: 2,
            degenerate: vec![],
        };
        let cfg = GmmConfig {
            max_iters: 0,
            ..GmmConfig::default()
        };
        let fit = gmm_align(&data, &prior, None, &cfg).unwrap();
        assert_eq!(fit.iterations, 0);
        assert_eq!(fit.log_likelihoods.len(), 1);
        assert!((fit.state.mixing_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_prior() {
        let (data, _) = blobs(5, 5, 1.0);
        let prior = PriorLabels {
            labels: vec![3; 10],
            num_classes: 2,
            degenerate: vec![],
        };
        assert!(gmm_align(&data, &prior, None, &GmmConfig::default()).is_err());
    }
}
