use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column z-score parameters (sample standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn zscore_fit(x: &DMatrix<f64>) -> Result<Scaler> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("z-score needs at least two samples"));
    }
    let mut mean = Vec::with_capacity(x.ncols());
    let mut std = Vec::with_capacity(x.ncols());
    for (j, col) in x.column_iter().enumerate() {
        let m = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
        let s = var.sqrt();
        if !(s > f64::EPSILON * m.abs().max(1.0)) {
            return Err(Error::ZeroVariance { column: j });
        }
        mean.push(m);
        std.push(s);
    }
    Ok(Scaler { mean, std })
}

pub fn zscore_apply(scaler: &Scaler, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != scaler.mean.len() {
        return Err(Error::invalid(format!(
            "scaler fitted on {} columns, got {}",
            scaler.mean.len(),
            x.ncols()
        )));
    }
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let (m, s) = (scaler.mean[j], scaler.std[j]);
        col.apply(|v| *v = (*v - m) / s);
    }
    Ok(out)
}

/// Affine map of the targets onto [0, 1].
pub fn normalize_target_01(y: &[f64]) -> Result<Vec<f64>> {
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::ConstantTarget);
    }
    Ok(y.iter().map(|v| (v - min) / (max - min)).collect())
}
