use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Fitted principal component projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// Column mean of the fitted data.
    pub mean: DVector<f64>,
    /// `dim x P`, orthonormal columns in descending eigenvalue order.
    pub basis: DMatrix<f64>,
    /// All covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    /// Fits on the rows of `data`. `components` outside `[1, min(n, dim)]` is
    /// clamped with a warning.
    pub fn fit(data: &DMatrix<f64>, components: usize) -> Result<Self> {
        let (n, dim) = data.shape();
        if n == 0 || dim == 0 {
            return Err(Error::InvalidArgument("PCA on an empty matrix".into()));
        }
        let max = n.min(dim);
        let p = if components == 0 || components > max {
            let clamped = components.clamp(1, max);
            warn!("PCA dimension {components} outside [1, {max}]; using {clamped}");
            clamped
        } else {
            components
        };

        let mean = data.row_mean().transpose();
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        let mut cov = centered.transpose() * &centered / denom;
        cov = (&cov + cov.transpose()) * 0.5;

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });

        let mut basis = DMatrix::zeros(dim, p);
        for (c, &idx) in order.iter().take(p).enumerate() {
            let mut v = eig.eigenvectors.column(idx).into_owned();
            // Sign convention: largest-magnitude entry positive (first on ties).
            let pivot =
                v.iter().enumerate().fold(
                    0,
                    |best, (i, x)| {
                        if x.abs() > v[best].abs() {
                            i
                        } else {
                            best
                        }
                    },
                );
            if v[pivot] < 0.0 {
                v.neg_mut();
            }
            basis.set_column(c, &v);
        }
        Ok(Self {
            mean,
            basis,
            eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        })
    }

    pub fn components(&self) -> usize {
        self.basis.ncols()
    }

    /// Projects the rows of `data`.
    pub fn transform(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        centered * &self.basis
    }

    pub fn transform_vector(&self, v: &[f64]) -> DVector<f64> {
        let x = DVector::from_column_slice(v) - &self.mean;
        self.basis.transpose() * x
    }

    /// Maps reduced rows back into the original space.
    pub fn inverse_transform(&self, reduced: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = reduced * self.basis.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }
}

/// Centers, then projects onto the top-`components` principal directions.
/// Returns the reduced rows together with the fitted projection.
pub fn reduce_dimensions(data: &DMatrix<f64>, components: usize) -> Result<(DMatrix<f64>, Pca)> {
    let pca = Pca::fit(data, components)?;
    Ok((pca.transform(data), pca))
}
