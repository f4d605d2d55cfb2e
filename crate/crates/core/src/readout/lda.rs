use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ridge::check_classes;
use crate::error::{Error, Result};

/// Projection onto the discriminant directions. Output coordinates have
/// identity pooled within-class covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaProjection {
    pub mean: DVector<f64>,
    /// features x components, by descending generalized eigenvalue.
    pub projection: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Solves `Sb v = λ Sw v` by whitening with the Cholesky factor of `Sw`.
/// `components` of `None` means `min(n_classes - 1, features)`.
pub fn lda_fit(x: &DMatrix<f64>, labels: &[usize], n_classes: usize, components: Option<usize>) -> Result<LdaProjection> {
    let (n, d) = x.shape();
    if labels.len() != n {
        return Err(Error::InvalidInput(format!("{n} rows but {} labels", labels.len())));
    }
    check_classes(labels, n_classes)?;
    let max_c = (n_classes - 1).min(d);
    let c = components.unwrap_or(max_c);
    if c == 0 || c > max_c {
        return Err(Error::InvalidConfig(format!("LDA components must be in 1..={max_c}, got {c}")));
    }
    if n <= n_classes {
        return Err(Error::InvalidInput("LDA needs more samples than classes".into()));
    }
    let mean = DVector::from_iterator(d, x.column_iter().map(|col| col.mean()));
    let mut class_mean = vec![DVector::<f64>::zeros(d); n_classes];
    let mut counts = vec![0usize; n_classes];
    for (row, &l) in x.row_iter().zip(labels) {
        class_mean[l] += row.transpose();
        counts[l] += 1;
    }
    for (m, &k) in class_mean.iter_mut().zip(&counts) {
        if k > 0 {
            *m /= k as f64;
        }
    }
    let mut sw = DMatrix::<f64>::zeros(d, d);
    for (row, &l) in x.row_iter().zip(labels) {
        let r = row.transpose() - &class_mean[l];
        sw += &r * r.transpose();
    }
    let mut sb = DMatrix::<f64>::zeros(d, d);
    for (m, &k) in class_mean.iter().zip(&counts) {
        let r = m - &mean;
        sb += (&r * r.transpose()) * k as f64;
    }
    let chol = match sw.clone().cholesky() {
        Some(ch) if (0..d).all(|i| ch.l_dirty()[(i, i)] > 1e-10 * sw.trace().max(1e-300).sqrt()) => ch,
        _ => {
            let eps = 1e-6 * sw.trace().max(f64::MIN_POSITIVE) / d as f64;
            log::warn!("within-class scatter is singular; regularizing with {eps:e} I");
            (sw + DMatrix::identity(d, d) * eps)
                .cholesky()
                .ok_or_else(|| Error::Singular("within-class scatter".into()))?
        }
    };
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::Singular("within-class scatter".into()))?;
    let m = &linv * sb * linv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let scale = ((n - n_classes) as f64).sqrt();
    let back = linv.transpose();
    let mut projection = DMatrix::zeros(d, c);
    for (j, &o) in order.iter().take(c).enumerate() {
        let mut v = &back * eig.eigenvectors.column(o) * scale;
        let lead = v.iter().copied().fold(0.0f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
        if lead < 0.0 {
            v = -v;
        }
        projection.column_mut(j).copy_from(&v);
    }
    Ok(LdaProjection {
        mean,
        projection,
        eigenvalues: order.iter().take(c).map(|&o| eig.eigenvalues[o]).collect(),
    })
}

impl LdaProjection {
    pub fn n_components(&self) -> usize {
        self.projection.ncols()
    }
}

pub fn lda_transform(p: &LdaProjection, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != p.mean.len() {
        return Err(Error::InvalidInput(format!("LDA expects {} features, got {}", p.mean.len(), x.ncols())));
    }
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-p.mean[j]);
    }
    Ok(xc * &p.projection)
}
