//! Linear SVM trained by dual coordinate descent on the hinge loss. The bias
//! is folded in as a constant feature, so the objective is
//! `½(‖w‖² + b²) + C Σ max(0, 1 − yᵢ(w·xᵢ + b))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ridge::{check_classes, labels_from_scores};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub max_epochs: usize,
    /// Stop when the spread of projected gradients drops below this.
    pub tol: f64,
    pub seed: u32,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            max_epochs: 1000,
            tol: 1e-3,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn with_c(c: f64) -> Self {
        SvmConfig { c, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub weights: DVector<f64>,
    pub bias: f64,
    /// Best primal objective seen after each epoch.
    pub objective_history: Vec<f64>,
    pub converged: bool,
}

/// One column of weights per one-vs-rest problem (a single column when
/// there are two classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub problems: Vec<BinarySvm>,
    pub n_classes: usize,
    pub c: f64,
}

fn primal(w: &[f64], xs: &DMatrix<f64>, y: &[f64], c: f64) -> f64 {
    let d = xs.nrows();
    let mut hinge = 0.0;
    for (i, col) in xs.column_iter().enumerate() {
        let m = y[i] * (0..d).map(|k| w[k] * col[k]).sum::<f64>();
        hinge += (1.0 - m).max(0.0);
    }
    0.5 * w.iter().map(|v| v * v).sum::<f64>() + c * hinge
}

/// `y` holds ±1. Columns of `xs` are augmented samples (features then 1).
fn solve_binary(xs: &DMatrix<f64>, y: &[f64], cfg: &SvmConfig, rng: &mut SeededRng) -> BinarySvm {
    let (d, n) = xs.shape();
    let c = cfg.c;
    let q: Vec<f64> = xs.column_iter().map(|col| col.norm_squared()).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut best_w = w.clone();
    let mut best = primal(&w, xs, y, c);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_epochs {
        let order = rng.permutation(n);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            if q[i] <= 0.0 {
                continue;
            }
            let col = xs.column(i);
            let g = y[i] * (0..d).map(|k| w[k] * col[k]).sum::<f64>() - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * y[i];
                for k in 0..d {
                    w[k] += delta * col[k];
                }
            }
        }
        let obj = primal(&w, xs, y, c);
        if obj < best {
            best = obj;
            best_w.copy_from_slice(&w);
        }
        history.push(best);
        if pg_max - pg_min < cfg.tol {
            converged = true;
            break;
        }
    }
    BinarySvm {
        weights: DVector::from_column_slice(&best_w[..d - 1]),
        bias: best_w[d - 1],
        objective_history: history,
        converged,
    }
}

pub fn linear_svm_fit(x: &DMatrix<f64>, labels: &[usize], n_classes: usize, cfg: &SvmConfig) -> Result<LinearSvmModel> {
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(Error::InvalidConfig(format!("SVM cost must be > 0, got {}", cfg.c)));
    }
    if cfg.max_epochs == 0 {
        return Err(Error::InvalidConfig("SVM needs at least one epoch".into()));
    }
    if x.nrows() != labels.len() {
        return Err(Error::InvalidInput(format!("{} feature rows but {} labels", x.nrows(), labels.len())));
    }
    check_classes(labels, n_classes)?;
    let (n, d) = x.shape();
    // Column-major samples make the inner loops contiguous.
    let mut xs = DMatrix::from_element(d + 1, n, 1.0);
    xs.rows_mut(0, d).copy_from(&x.transpose());
    let mut rng = SeededRng::new(cfg.seed);
    let positives: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
    let problems: Vec<BinarySvm> = positives
        .iter()
        .map(|&k| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
            let p = solve_binary(&xs, &y, cfg, &mut rng);
            if !p.converged {
                log::debug!(
                    "linear SVM (class {k}) did not converge in {} epochs; using the best iterate",
                    cfg.max_epochs
                );
            }
            p
        })
        .collect();
    Ok(LinearSvmModel {
        problems,
        n_classes,
        c: cfg.c,
    })
}

impl LinearSvmModel {
    pub fn decision(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.problems[0].weights.len();
        if x.ncols() != d {
            return Err(Error::InvalidInput(format!("model expects {d} features, got {}", x.ncols())));
        }
        let mut s = DMatrix::zeros(x.nrows(), self.problems.len());
        for (k, p) in self.problems.iter().enumerate() {
            let col = x * &p.weights;
            s.column_mut(k).copy_from(&col.add_scalar(p.bias));
        }
        Ok(s)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(labels_from_scores(&self.decision(x)?))
    }
}
