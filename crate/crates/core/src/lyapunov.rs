//! Largest Lyapunov exponent by the Rosenstein nearest-neighbour method, and
//! the scan relating it to classification accuracy across ρ.

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::attractor::{integrate, AttractorSpec, IntegrationConfig, State3};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::readout::{iteration_sweep, SweepConfig};
use crate::transform::transform;

/// Row `t` is `(s[t], s[t+τ], …, s[t+(dim−1)τ])`.
pub fn delay_embed(series: &[f64], dim: usize, tau: usize) -> Result<DMatrix<f64>> {
    if dim == 0 || tau == 0 {
        return Err(Error::InvalidConfig("embedding dim and delay must be positive".into()));
    }
    let span = (dim - 1) * tau;
    if series.len() <= span {
        return Err(Error::InvalidInput(format!(
            "series of length {} is too short for dim {dim}, delay {tau}",
            series.len()
        )));
    }
    let rows = series.len() - span;
    Ok(DMatrix::from_fn(rows, dim, |t, j| series[t + j * tau]))
}

fn centered(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len() as f64;
    let m = series.iter().sum::<f64>() / n;
    let c: Vec<f64> = series.iter().map(|v| v - m).collect();
    if c.iter().all(|v| v.abs() <= 1e-12 * m.abs().max(1.0)) {
        return Err(Error::ZeroVariance { column: 0 });
    }
    Ok(c)
}

/// Unbiased autocorrelation (lag-k sum divided by n − k), normalized to 1
/// at lag 0. Computed through a zero-padded FFT.
pub fn autocorrelation(series: &[f64]) -> Result<Vec<f64>> {
    let x = centered(series)?;
    let n = x.len();
    let len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let raw: Vec<f64> = (0..n).map(|k| buf[k].re / len as f64 / (n - k) as f64).collect();
    let r0 = raw[0];
    Ok(raw.into_iter().map(|v| v / r0).collect())
}

pub const FALLBACK_DELAY: usize = 10;
pub const FALLBACK_MEAN_PERIOD: usize = 100;

/// First local minimum of the autocorrelation, or [`FALLBACK_DELAY`].
pub fn autocorrelation_delay(series: &[f64]) -> Result<usize> {
    let ac = autocorrelation(series)?;
    Ok((1..ac.len() / 2)
        .find(|&i| ac[i] < ac[i - 1] && ac[i] <= ac[i + 1])
        .unwrap_or(FALLBACK_DELAY))
}

/// First lag at which the autocorrelation falls below 1/e, or
/// [`FALLBACK_DELAY`].
pub fn efold_delay(series: &[f64]) -> Result<usize> {
    let ac = autocorrelation(series)?;
    let limit = (-1.0f64).exp();
    Ok((1..ac.len() / 2).find(|&i| ac[i] < limit).unwrap_or(FALLBACK_DELAY))
}

/// How the embedding delay is picked when not given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayRule {
    /// Autocorrelation decay to 1/e. Stable across realizations of the same
    /// attractor.
    #[default]
    Efold,
    /// First local minimum of the autocorrelation. For Lorenz x-series the
    /// shallow ripples make this jump between distant lags.
    FirstMinimum,
}

pub fn select_delay(series: &[f64], rule: DelayRule) -> Result<usize> {
    match rule {
        DelayRule::Efold => efold_delay(series),
        DelayRule::FirstMinimum => autocorrelation_delay(series),
    }
}

/// Reciprocal of the power-weighted mean frequency (in samples), rounded up.
pub fn mean_period(series: &[f64]) -> Result<usize> {
    let x = centered(series)?;
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let (mut num, mut den) = (0.0, 0.0);
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let p = c.norm_sqr();
        num += k as f64 / n as f64 * p;
        den += p;
    }
    if den <= 0.0 || num <= 0.0 {
        return Ok(FALLBACK_MEAN_PERIOD);
    }
    let mp = (den / num).ceil();
    Ok(if mp.is_finite() { mp as usize } else { FALLBACK_MEAN_PERIOD })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LleEstimate {
    /// Per unit time.
    pub lambda_max: f64,
    pub embedding_dim: usize,
    pub delay: usize,
    pub mean_period: usize,
    /// Inclusive step range of the least-squares fit.
    pub fit_window: (usize, usize),
    /// Mean log-distance after `k` steps, `k = 0..=fit_window.1`.
    #[serde(with = "crate::serde_float::vec")]
    pub divergence_curve: Vec<f64>,
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Rosenstein estimate. Each reference point among the first `M − end`
/// embedded points is paired with its nearest neighbour (same pool) at
/// temporal separation greater than `mean_period`; the mean log distance of
/// the pairs is tracked for `end` steps and its slope over `fit_window`,
/// divided by `dt`, is the exponent. Zero distances are left out of the
/// average.
pub fn rosenstein_lle(
    series: &[f64],
    dim: usize,
    tau: usize,
    mean_period: usize,
    fit_window: (usize, usize),
    dt: f64,
) -> Result<LleEstimate> {
    let (start, end) = fit_window;
    if start >= end {
        return Err(Error::InvalidConfig(format!("fit window ({start}, {end}) is empty")));
    }
    if mean_period == 0 {
        return Err(Error::InvalidConfig("mean period must be positive".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    let e = delay_embed(series, dim, tau)?;
    let m = e.nrows();
    if m <= end + mean_period + 1 {
        return Err(Error::InvalidInput(format!(
            "embedded series of {m} points is too short for window end {end} and mean period {mean_period}"
        )));
    }
    let pool = m - end;
    // Row-major copy for cache-friendly distance loops.
    let pts: Vec<f64> = (0..m).flat_map(|t| (0..dim).map(move |j| (t, j))).map(|(t, j)| e[(t, j)]).collect();
    let dist2 = |a: usize, b: usize| -> f64 {
        (0..dim).map(|j| {
            let d = pts[a * dim + j] - pts[b * dim + j];
            d * d
        })
        .sum()
    };
    let neighbours: Vec<Option<usize>> = (0..pool)
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(f64, usize)> = None;
            for j in 0..pool {
                if i.abs_diff(j) <= mean_period {
                    continue;
                }
                let d = dist2(i, j);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, j));
                }
            }
            best.map(|(_, j)| j)
        })
        .collect();
    let pairs: Vec<(usize, usize)> = neighbours.iter().enumerate().filter_map(|(i, n)| n.map(|j| (i, j))).collect();
    if pairs.is_empty() {
        return Err(Error::NoNeighborPairs);
    }
    let divergence_curve: Vec<f64> = (0..=end)
        .into_par_iter()
        .map(|k| {
            let (mut s, mut c) = (0.0, 0usize);
            for &(i, j) in &pairs {
                let d = dist2(i + k, j + k);
                if d > 0.0 {
                    s += 0.5 * d.ln();
                    c += 1;
                }
            }
            if c == 0 {
                f64::NAN
            } else {
                s / c as f64
            }
        })
        .collect();
    let ks: Vec<f64> = (start..=end).map(|k| k as f64).collect();
    let ys = &divergence_curve[start..=end];
    if ys.iter().any(|v| v.is_nan()) {
        return Err(Error::NoNeighborPairs);
    }
    Ok(LleEstimate {
        lambda_max: slope(&ks, ys) / dt,
        embedding_dim: dim,
        delay: tau,
        mean_period,
        fit_window,
        divergence_curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LleConfig {
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
    /// `None` applies `delay_rule`.
    #[serde(default)]
    pub delay: Option<usize>,
    #[serde(default)]
    pub delay_rule: DelayRule,
    /// `None` selects the spectral mean period.
    #[serde(default)]
    pub mean_period: Option<usize>,
    #[serde(default = "default_window")]
    pub fit_window: (usize, usize),
    #[serde(default = "default_series_len")]
    pub series_len: usize,
    /// Leading steps dropped before estimation.
    #[serde(default)]
    pub transient: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dim() -> usize {
    3
}

fn default_window() -> (usize, usize) {
    (1, 200)
}

fn default_series_len() -> usize {
    20_000
}

fn default_dt() -> f64 {
    1e-2
}

impl Default for LleConfig {
    fn default() -> Self {
        LleConfig {
            embedding_dim: default_dim(),
            delay: None,
            delay_rule: DelayRule::default(),
            mean_period: None,
            fit_window: default_window(),
            series_len: default_series_len(),
            transient: 0,
            dt: default_dt(),
        }
    }
}

/// Initial condition of the reference trajectory.
pub const REFERENCE_INIT: State3 = State3 { x: 1.0, y: 1.05, z: -1.0 };

/// x-coordinate of the reference trajectory, transient removed.
pub fn reference_series(spec: &AttractorSpec, cfg: &LleConfig) -> Result<Vec<f64>> {
    let steps = IntegrationConfig::new(cfg.dt, cfg.series_len + cfg.transient)?;
    Ok(integrate(spec, REFERENCE_INIT, &steps)?
        .into_iter()
        .skip(cfg.transient)
        .map(|s| s.x)
        .collect())
}

pub fn estimate_lle(series: &[f64], cfg: &LleConfig) -> Result<LleEstimate> {
    let tau = match cfg.delay {
        Some(t) => t,
        None => select_delay(series, cfg.delay_rule)?,
    };
    let mp = match cfg.mean_period {
        Some(p) => p,
        None => mean_period(series)?,
    };
    rosenstein_lle(series, cfg.embedding_dim, tau, mp, cfg.fit_window, cfg.dt)
}

/// LLE of the flow's reference trajectory.
pub fn attractor_lle(spec: &AttractorSpec, cfg: &LleConfig) -> Result<LleEstimate> {
    estimate_lle(&reference_series(spec, cfg)?, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub rho: f64,
    /// NaN when the exponent is undefined (trajectory collapsed to a point).
    #[serde(with = "crate::serde_float")]
    pub lle: f64,
    /// NaN when every fit failed.
    #[serde(with = "crate::serde_float")]
    pub best_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Lorenz σ and β held fixed while ρ varies.
    pub sigma: f64,
    pub beta: f64,
    pub integration: IntegrationConfig,
    pub lle: LleConfig,
    pub sweep: SweepConfig,
}

/// One row per ρ: the best sweep accuracy on `ds` and the exponent of the
/// reference trajectory. Rows are computed in order; each row parallelizes
/// internally, so the table is reproducible.
pub fn lle_accuracy_scan(ds: &Dataset, split: &Split, rho_grid: &[f64], cfg: &ScanConfig) -> Result<Vec<ScanRow>> {
    if ds.class_names().is_none() {
        return Err(Error::InvalidConfig("the scan needs a classification dataset".into()));
    }
    if let Some(bad) = rho_grid.iter().find(|r| !(1.0..=100.0).contains(*r)) {
        return Err(Error::InvalidConfig(format!("scan rho {bad} outside [1, 100]")));
    }
    let mut rows = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        let spec = AttractorSpec::lorenz(cfg.sigma, cfg.beta, rho)?;
        let lle = match attractor_lle(&spec, &cfg.lle) {
            Ok(e) => e.lambda_max,
            Err(err) => {
                log::warn!("rho {rho}: LLE undefined ({err})");
                f64::NAN
            }
        };
        let best_accuracy = match transform(ds.x(), &spec, &cfg.integration)
            .and_then(|t| iteration_sweep(&[t], ds.target(), split, &cfg.sweep))
        {
            Ok(r) => r.reported_metric,
            Err(err) => {
                log::warn!("rho {rho}: sweep failed ({err})");
                f64::NAN
            }
        };
        log::info!("rho {rho}: lle {lle:.4}, accuracy {best_accuracy:.4}");
        rows.push(ScanRow { rho, lle, best_accuracy });
    }
    Ok(rows)
}

pub fn write_scan_csv<W: std::io::Write>(rows: &[ScanRow], mut w: W) -> Result<()> {
    writeln!(w, "rho,lle,accuracy")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.rho, r.lle, r.best_accuracy)?;
    }
    Ok(())
}
