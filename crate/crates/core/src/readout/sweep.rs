use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_pipeline, score, MetricKind, Prediction, ReadoutKind};
use crate::data::{split_indices, Split, SplitConfig, Target};
use crate::error::{Error, Result};
use crate::transform::{stack_slices, TrajectoryTensor};

/// How the reported iteration is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Best iteration picked on the test set. Optimistic; kept for comparison
    /// with results reported that way.
    Paper,
    /// Best iteration picked on a validation split carved out of the
    /// training rows; the reported metric is the test score at that iteration.
    #[default]
    Honest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub readout: ReadoutKind,
    /// `Some(components)` inserts an LDA stage fitted on the training rows.
    #[serde(default)]
    pub lda: Option<Option<usize>>,
    #[serde(default)]
    pub mode: SelectionMode,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub seed: u32,
}

fn default_validation_fraction() -> f64 {
    0.2
}

impl SweepConfig {
    pub fn new(readout: ReadoutKind, mode: SelectionMode) -> Self {
        SweepConfig {
            readout,
            lda: None,
            mode,
            validation_fraction: default_validation_fraction(),
            seed: 0,
        }
    }

    pub fn with_lda(mut self, components: Option<usize>) -> Self {
        self.lda = Some(components);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metric: MetricKind,
    pub mode: SelectionMode,
    /// Selection metric per iteration (test set in paper mode, validation
    /// set in honest mode). NaN where the fit failed.
    #[serde(with = "crate::serde_float::vec")]
    pub curve: Vec<f64>,
    /// Test metric per iteration for a model fit on all training rows.
    #[serde(with = "crate::serde_float::vec")]
    pub test_curve: Vec<f64>,
    /// 1-based; the first iteration attaining the optimum of `curve`.
    pub best_iteration: usize,
    pub best_metric: f64,
    /// Test metric at `best_iteration`.
    pub reported_metric: f64,
    /// Test predictions at `best_iteration`.
    pub predictions: Prediction,
}

impl SweepResult {
    pub fn write_curve_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,selection_metric,test_metric")?;
        for (k, (s, t)) in self.curve.iter().zip(&self.test_curve).enumerate() {
            writeln!(w, "{},{},{}", k + 1, s, t)?;
        }
        Ok(())
    }
}

pub(crate) fn select_target(t: &Target, rows: &[usize]) -> Target {
    match t {
        Target::Real(v) => Target::Real(rows.iter().map(|&i| v[i]).collect()),
        Target::Class { labels, names } => Target::Class {
            labels: rows.iter().map(|&i| labels[i]).collect(),
            names: names.clone(),
        },
    }
}

struct Eval {
    selection: f64,
    test: f64,
    predictions: Prediction,
}

fn fit_and_score(x: &DMatrix<f64>, target: &Target, train: &[usize], eval: &[usize], cfg: &SweepConfig) -> Result<(f64, Prediction)> {
    let model = fit_pipeline(&x.select_rows(train), &select_target(target, train), &cfg.readout, cfg.lda, cfg.seed)?;
    let pred = model.predict(&x.select_rows(eval))?;
    let m = score(&pred, &select_target(target, eval))?;
    Ok((m, pred))
}

/// Sweeps `n_iterations` feature matrices produced by `features(k)` for
/// 0-based `k`. Iterations are evaluated concurrently; results do not
/// depend on scheduling. Failed fits are recorded as NaN.
pub fn sweep_features<F>(n_iterations: usize, features: F, target: &Target, split: &Split, cfg: &SweepConfig) -> Result<SweepResult>
where
    F: Fn(usize) -> Result<DMatrix<f64>> + Sync,
{
    if n_iterations == 0 {
        return Err(Error::InvalidInput("nothing to sweep".into()));
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::EmptyPartition("sweep split".into()));
    }
    let metric = cfg.readout.metric();
    let (fit_rows, val_rows) = match cfg.mode {
        SelectionMode::Paper => (Vec::new(), Vec::new()),
        SelectionMode::Honest => {
            let inner = split_indices(
                split.train.len(),
                &SplitConfig::new(1.0 - cfg.validation_fraction, cfg.seed)?,
            )?;
            (
                inner.train.iter().map(|&i| split.train[i]).collect(),
                inner.test.iter().map(|&i| split.train[i]).collect::<Vec<_>>(),
            )
        }
    };
    let evals: Vec<Result<Eval>> = (0..n_iterations)
        .into_par_iter()
        .map(|k| {
            let x = features(k)?;
            let (test, predictions) = fit_and_score(&x, target, &split.train, &split.test, cfg)?;
            let selection = match cfg.mode {
                SelectionMode::Paper => test,
                SelectionMode::Honest => fit_and_score(&x, target, &fit_rows, &val_rows, cfg)?.0,
            };
            Ok(Eval {
                selection,
                test,
                predictions,
            })
        })
        .collect();
    let mut first_err = None;
    let mut curve = Vec::with_capacity(n_iterations);
    let mut test_curve = Vec::with_capacity(n_iterations);
    let mut preds = Vec::with_capacity(n_iterations);
    for (k, e) in evals.into_iter().enumerate() {
        match e {
            Ok(e) => {
                curve.push(e.selection);
                test_curve.push(e.test);
                preds.push(Some(e.predictions));
            }
            Err(err) => {
                log::debug!("iteration {} failed: {err}", k + 1);
                first_err.get_or_insert(err);
                curve.push(f64::NAN);
                test_curve.push(f64::NAN);
                preds.push(None);
            }
        }
    }
    let mut best: Option<usize> = None;
    for (k, &v) in curve.iter().enumerate() {
        if best.map_or(!v.is_nan(), |b| metric.better(v, curve[b])) {
            best = Some(k);
        }
    }
    let Some(b) = best else {
        return Err(first_err.unwrap_or_else(|| Error::InvalidInput("every iteration failed".into())));
    };
    Ok(SweepResult {
        metric,
        mode: cfg.mode,
        best_iteration: b + 1,
        best_metric: curve[b],
        reported_metric: test_curve[b],
        predictions: preds[b].take().expect("successful iteration"),
        curve,
        test_curve,
    })
}

/// Sweeps every recorded iteration of one or more aligned tensors.
pub fn iteration_sweep(tensors: &[TrajectoryTensor], target: &Target, split: &Split, cfg: &SweepConfig) -> Result<SweepResult> {
    let first = tensors.first().ok_or_else(|| Error::invalid("no tensors to sweep"))?;
    if tensors.iter().any(|t| t.n_steps() != first.n_steps() || t.n_samples() != first.n_samples()) {
        return Err(Error::invalid("tensors are not aligned"));
    }
    if target.len() != first.n_samples() {
        return Err(Error::InvalidInput(format!(
            "tensor has {} samples, target has {}",
            first.n_samples(),
            target.len()
        )));
    }
    sweep_features(first.n_steps(), |k| Ok(stack_slices(tensors, k)?.values), target, split, cfg)
}
