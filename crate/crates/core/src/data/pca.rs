use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal axes from the covariance eigendecomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// vars x d, columns ordered by descending eigenvalue.
    pub components: DMatrix<f64>,
    pub explained_variance: Vec<f64>,
}

impl Pca {
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::invalid(format!(
                "PCA fitted on {} columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * &self.components)
    }

    pub fn reconstruct(&self, reduced: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = reduced * self.components.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }
}

pub fn pca_reduce(x: &DMatrix<f64>, d: usize) -> Result<(Pca, DMatrix<f64>)> {
    let (n, p) = x.shape();
    if d == 0 || d > n.min(p) {
        return Err(Error::invalid(format!(
            "PCA dimension {d} must lie in [1, {}]",
            n.min(p)
        )));
    }
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two samples"));
    }
    let mean = DVector::from_iterator(p, x.column_iter().map(|c| c.mean()));
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = (centered.transpose() * &centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = DMatrix::zeros(p, d);
    for (k, &idx) in order.iter().take(d).enumerate() {
        let mut v = eig.eigenvectors.column(idx).clone_owned();
        let (imax, _) = v.iter().enumerate().fold((0, 0.0f64), |acc, (i, &a)| {
            if a.abs() > acc.1 {
                (i, a.abs())
            } else {
                acc
            }
        });
        if v[imax] < 0.0 {
            v = -v;
        }
        components.set_column(k, &v);
    }
    let explained_variance = order.iter().take(d).map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let pca = Pca {
        mean,
        components,
        explained_variance,
    };
    let reduced = centered * &pca.components;
    Ok((pca, reduced))
}
