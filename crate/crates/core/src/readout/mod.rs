//! Linear decision layers trained on transformed features, plus metrics and
//! the best-iteration sweep.

mod knn;
mod lda;
mod metrics;
mod ridge;
mod svm;
mod sweep;

pub use knn::{knn_predict, DEFAULT_K};
pub use lda::{lda_fit, lda_transform, LdaProjection};
pub use metrics::{accuracy, confusion, rmse, ConfusionMatrix};
pub use ridge::{
    ols_fit, ridge_classify_fit, ridge_classify_predict, ridge_fit, ridge_fit_multi, ridge_predict, RidgeClassifier, RidgeModel,
    DEFAULT_LAMBDA,
};
pub use svm::{linear_svm_fit, BinarySvm, LinearSvmModel, SvmConfig};
pub(crate) use sweep::select_target;
pub use sweep::{iteration_sweep, sweep_features, SelectionMode, SweepConfig, SweepResult};

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::attractor::{AttractorSpec, IntegrationConfig};
use crate::data::Target;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReadoutKind {
    /// Ordinary least squares.
    LinearRegression,
    Ridge {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    RidgeClassifier {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    LinearSvm {
        #[serde(default = "default_c")]
        c: f64,
    },
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_c() -> f64 {
    1.0
}

fn default_k() -> usize {
    DEFAULT_K
}

impl ReadoutKind {
    pub fn ridge() -> Self {
        ReadoutKind::Ridge { lambda: DEFAULT_LAMBDA }
    }

    pub fn ridge_classifier() -> Self {
        ReadoutKind::RidgeClassifier { lambda: DEFAULT_LAMBDA }
    }

    pub fn linear_svm() -> Self {
        ReadoutKind::LinearSvm { c: 1.0 }
    }

    pub fn is_classifier(&self) -> bool {
        !matches!(self, ReadoutKind::Ridge { .. } | ReadoutKind::LinearRegression)
    }

    /// Short label for file names and report keys.
    pub fn label(&self) -> &'static str {
        match self {
            ReadoutKind::LinearRegression => "linear_regression",
            ReadoutKind::Ridge { .. } => "ridge",
            ReadoutKind::RidgeClassifier { .. } => "ridge_classifier",
            ReadoutKind::LinearSvm { .. } => "linear_svm",
            ReadoutKind::Knn { .. } => "knn",
        }
    }

    pub fn metric(&self) -> MetricKind {
        if self.is_classifier() {
            MetricKind::Accuracy
        } else {
            MetricKind::Rmse
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Rmse,
    Accuracy,
}

impl MetricKind {
    /// Whether `a` strictly improves on `b`. NaN never improves.
    pub fn better(self, a: f64, b: f64) -> bool {
        if a.is_nan() {
            return false;
        }
        if b.is_nan() {
            return true;
        }
        match self {
            MetricKind::Rmse => a < b,
            MetricKind::Accuracy => a > b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Real(Vec<f64>),
    Labels(Vec<usize>),
}

impl Prediction {
    pub fn len(&self) -> usize {
        match self {
            Prediction::Real(v) => v.len(),
            Prediction::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// RMSE for real targets, accuracy for class targets.
pub fn score(pred: &Prediction, truth: &Target) -> Result<f64> {
    match (pred, truth) {
        (Prediction::Real(p), Target::Real(t)) => rmse(p, t),
        (Prediction::Labels(p), Target::Class { labels, .. }) => accuracy(p, labels),
        _ => Err(Error::InvalidInput("prediction kind does not match the target".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedReadout {
    Ridge(RidgeModel),
    RidgeClassifier(RidgeClassifier),
    LinearSvm(LinearSvmModel),
    Knn {
        train_x: DMatrix<f64>,
        train_labels: Vec<usize>,
        k: usize,
    },
}

/// Optional LDA projection followed by a readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub lda: Option<LdaProjection>,
    pub readout: FittedReadout,
}

pub(crate) fn class_target(t: &Target) -> Result<(&[usize], usize)> {
    match t {
        Target::Class { labels, names } => Ok((labels, names.len())),
        Target::Real(_) => Err(Error::InvalidConfig("classifier readout needs a class target".into())),
    }
}

/// `lda` is `Some(components)` to insert an LDA stage; `Some(None)` keeps
/// the maximal number of components.
pub fn fit_pipeline(x: &DMatrix<f64>, target: &Target, kind: &ReadoutKind, lda: Option<Option<usize>>, seed: u32) -> Result<Pipeline> {
    let (x, lda) = match lda {
        Some(components) => {
            let (labels, k) = class_target(target)?;
            let p = lda_fit(x, labels, k, components)?;
            (lda_transform(&p, x)?, Some(p))
        }
        None => (x.clone(), None),
    };
    let readout = match *kind {
        ReadoutKind::LinearRegression => match target {
            Target::Real(y) => FittedReadout::Ridge(ols_fit(&x, y)?),
            Target::Class { .. } => return Err(Error::InvalidConfig("linear regression needs a real target".into())),
        },
        ReadoutKind::Ridge { lambda } => match target {
            Target::Real(y) => FittedReadout::Ridge(ridge_fit(&x, y, lambda)?),
            Target::Class { .. } => return Err(Error::InvalidConfig("ridge regression needs a real target".into())),
        },
        ReadoutKind::RidgeClassifier { lambda } => {
            let (labels, k) = class_target(target)?;
            FittedReadout::RidgeClassifier(ridge_classify_fit(&x, labels, k, lambda)?)
        }
        ReadoutKind::LinearSvm { c } => {
            let (labels, k) = class_target(target)?;
            let cfg = SvmConfig { c, seed, ..SvmConfig::default() };
            FittedReadout::LinearSvm(linear_svm_fit(&x, labels, k, &cfg)?)
        }
        ReadoutKind::Knn { k } => {
            let (labels, _) = class_target(target)?;
            if k == 0 || k > labels.len() {
                return Err(Error::InvalidConfig(format!("k must be in 1..={}, got {k}", labels.len())));
            }
            FittedReadout::Knn {
                train_x: x,
                train_labels: labels.to_vec(),
                k,
            }
        }
    };
    Ok(Pipeline { lda, readout })
}

impl Pipeline {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Prediction> {
        let projected;
        let x = match &self.lda {
            Some(p) => {
                projected = lda_transform(p, x)?;
                &projected
            }
            None => x,
        };
        Ok(match &self.readout {
            FittedReadout::Ridge(m) => Prediction::Real(ridge_predict(m, x)?),
            FittedReadout::RidgeClassifier(m) => Prediction::Labels(ridge_classify_predict(m, x)?),
            FittedReadout::LinearSvm(m) => Prediction::Labels(m.predict(x)?),
            FittedReadout::Knn { train_x, train_labels, k } => Prediction::Labels(knn_predict(train_x, train_labels, x, *k)?),
        })
    }
}

/// Which transform produced the model's input features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProvenance {
    pub specs: Vec<AttractorSpec>,
    pub integration: IntegrationConfig,
    /// 1-based.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub pipeline: Pipeline,
    #[serde(default)]
    pub class_names: Option<Vec<String>>,
    #[serde(default)]
    pub provenance: Option<FeatureProvenance>,
}

pub fn save_model(model: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, model)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_ordering() {
        assert!(MetricKind::Rmse.better(0.1, 0.2));
        assert!(MetricKind::Accuracy.better(0.9, 0.8));
        assert!(!MetricKind::Accuracy.better(f64::NAN, 0.1));
        assert!(MetricKind::Accuracy.better(0.1, f64::NAN));
    }

    #[test]
    fn model_round_trip() {
        let x = DMatrix::from_row_slice(6, 2, &[0.0, 0.1, 0.2, -0.3, -0.1, 0.0, 3.0, 3.1, 2.9, 3.3, 3.2, 2.8]);
        let t = Target::Class {
            labels: vec![0, 0, 0, 1, 1, 1],
            names: vec!["a".into(), "b".into()],
        };
        let dir = tempfile::tempdir().unwrap();
        for kind in [ReadoutKind::ridge_classifier(), ReadoutKind::linear_svm(), ReadoutKind::Knn { k: 3 }] {
            let pipeline = fit_pipeline(&x, &t, &kind, Some(None), 0).unwrap();
            let saved = SavedModel {
                pipeline,
                class_names: Some(vec!["a".into(), "b".into()]),
                provenance: Some(FeatureProvenance {
                    specs: vec![AttractorSpec::lorenz_rho(97.0).unwrap()],
                    integration: IntegrationConfig::default(),
                    iteration: 98,
                }),
            };
            let path = dir.path().join("m.json");
            save_model(&saved, &path).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back.pipeline.predict(&x).unwrap(), saved.pipeline.predict(&x).unwrap());
            assert_eq!(back.provenance, saved.provenance);
        }
    }

    #[test]
    fn readout_config_from_json() {
        let k: ReadoutKind = serde_json::from_str(r#"{"kind":"ridge_classifier"}"#).unwrap();
        assert_eq!(k, ReadoutKind::ridge_classifier());
        let k: ReadoutKind = serde_json::from_str(r#"{"kind":"linear_svm","c":10}"#).unwrap();
        assert_eq!(k, ReadoutKind::LinearSvm { c: 10.0 });
    }

    #[test]
    fn mismatched_targets_are_rejected() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let t = Target::Real(vec![0.0, 1.0, 2.0]);
        assert!(fit_pipeline(&x, &t, &ReadoutKind::ridge_classifier(), None, 0).is_err());
        assert!(fit_pipeline(&x, &t, &ReadoutKind::ridge(), Some(None), 0).is_err());
    }
}
