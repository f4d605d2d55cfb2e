use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Linear model `X w + b` with one column of `weights` per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: DMatrix<f64>,
    pub intercept: DVector<f64>,
    pub reg_lambda: f64,
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Solves `(XcᵀXc + λI) W = XcᵀYc` on centered data, so the intercept is not
/// penalized. With `fit_intercept == false` no centering happens.
pub fn ridge_fit_multi(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64, fit_intercept: bool) -> Result<RidgeModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("ridge lambda must be finite and >= 0, got {lambda}")));
    }
    if x.nrows() != y.nrows() {
        return Err(Error::InvalidInput(format!("{} feature rows but {} targets", x.nrows(), y.nrows())));
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("cannot fit on zero samples".into()));
    }
    let d = x.ncols();
    let (xm, ym) = if fit_intercept {
        (column_means(x), column_means(y))
    } else {
        (DVector::zeros(d), DVector::zeros(y.ncols()))
    };
    let mut xc = x.clone();
    for (j, mut c) in xc.column_iter_mut().enumerate() {
        c.add_scalar_mut(-xm[j]);
    }
    let mut yc = y.clone();
    for (j, mut c) in yc.column_iter_mut().enumerate() {
        c.add_scalar_mut(-ym[j]);
    }
    let xt = xc.transpose();
    let mut a = &xt * &xc;
    for i in 0..d {
        a[(i, i)] += lambda;
    }
    let rhs = &xt * &yc;
    let scale = (0..d).map(|i| a[(i, i)]).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let chol = a.clone().cholesky().filter(|c| {
        let l = c.l_dirty();
        (0..d).all(|i| l[(i, i)] * l[(i, i)] > 1e-12 * scale)
    });
    let weights = match chol {
        Some(c) => c.solve(&rhs),
        None if lambda == 0.0 => {
            return Err(Error::Singular(
                "normal equations are singular at lambda = 0; use lambda > 0".into(),
            ))
        }
        None => a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("ridge normal equations".into()))?,
    };
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    let intercept = ym - weights.transpose() * xm;
    Ok(RidgeModel {
        weights,
        intercept,
        reg_lambda: lambda,
    })
}

/// Ordinary least squares with an intercept: the minimum-norm solution on
/// centered data, singular values below `max(n, d)·ε·σ_max` discarded.
/// Unlike ridge at λ = 0 this never fails on rank-deficient features.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<RidgeModel> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidInput(format!("{} feature rows but {} targets", x.nrows(), y.len())));
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("cannot fit on zero samples".into()));
    }
    let xm = column_means(x);
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let mut xc = x.clone();
    for (j, mut c) in xc.column_iter_mut().enumerate() {
        c.add_scalar_mut(-xm[j]);
    }
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - ym));
    let svd = xc.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = smax * x.nrows().max(x.ncols()) as f64 * f64::EPSILON;
    let w = svd.solve(&yc, eps).map_err(|e| Error::Singular(e.to_string()))?;
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    let intercept = DVector::from_element(1, ym - w.dot(&xm));
    Ok(RidgeModel {
        weights: DMatrix::from_column_slice(w.len(), 1, w.as_slice()),
        intercept,
        reg_lambda: 0.0,
    })
}

pub fn ridge_fit(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    ridge_fit_multi(x, &DMatrix::from_column_slice(y.len(), 1, y), lambda, true)
}

impl RidgeModel {
    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    /// Scores for every output, samples x outputs.
    pub fn decision(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.weights.nrows() {
            return Err(Error::InvalidInput(format!(
                "model expects {} features, got {}",
                self.weights.nrows(),
                x.ncols()
            )));
        }
        let mut s = x * &self.weights;
        for (j, mut c) in s.column_iter_mut().enumerate() {
            c.add_scalar_mut(self.intercept[j]);
        }
        Ok(s)
    }
}

/// First output column.
pub fn ridge_predict(model: &RidgeModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(model.decision(x)?.column(0).iter().copied().collect())
}

/// One-vs-rest ridge on ±1 targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeClassifier {
    pub model: RidgeModel,
    pub n_classes: usize,
}

fn pm_targets(labels: &[usize], n_classes: usize) -> DMatrix<f64> {
    if n_classes == 2 {
        DMatrix::from_fn(labels.len(), 1, |i, _| if labels[i] == 1 { 1.0 } else { -1.0 })
    } else {
        DMatrix::from_fn(labels.len(), n_classes, |i, k| if labels[i] == k { 1.0 } else { -1.0 })
    }
}

pub(crate) fn check_classes(labels: &[usize], n_classes: usize) -> Result<()> {
    if n_classes < 2 {
        return Err(Error::InvalidInput("classification needs at least two classes".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::OutOfRange { index: bad, len: n_classes });
    }
    let mut seen = vec![false; n_classes];
    labels.iter().for_each(|&l| seen[l] = true);
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::InvalidInput("training labels contain a single class".into()));
    }
    Ok(())
}

/// Index of the largest score; ties go to the lower index.
pub(crate) fn argmax(row: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in row.enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

/// Binary problems keep a single score column and predict by its sign.
pub(crate) fn labels_from_scores(scores: &DMatrix<f64>) -> Vec<usize> {
    if scores.ncols() == 1 {
        scores.column(0).iter().map(|&s| usize::from(s > 0.0)).collect()
    } else {
        scores.row_iter().map(|r| argmax(r.iter().copied())).collect()
    }
}

pub fn ridge_classify_fit(x: &DMatrix<f64>, labels: &[usize], n_classes: usize, lambda: f64) -> Result<RidgeClassifier> {
    check_classes(labels, n_classes)?;
    let model = ridge_fit_multi(x, &pm_targets(labels, n_classes), lambda, true)?;
    Ok(RidgeClassifier { model, n_classes })
}

pub fn ridge_classify_predict(clf: &RidgeClassifier, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    Ok(labels_from_scores(&clf.model.decision(x)?))
}
