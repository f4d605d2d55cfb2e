//! Datasets and everything that touches them before the chaotic transform.

mod idx;
mod pca;
mod scale;
mod schema;
mod smote;
mod split;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub use idx::{load_mnist_idx, read_idx, write_idx, IdxArray};
pub use pca::{pca_reduce, Pca};
pub use scale::{normalize_target_01, zscore_apply, zscore_fit, Scaler};
pub use schema::{
    import_embedding, load_csv, CategoricalColumn, CategoricalEncoding, ClassRule, CsvSchema,
    MissingPolicy, SuspectPolicy,
};
pub use smote::{smote_balance, DEFAULT_SMOTE_K};
pub use split::{split_indices, train_test_split, Split, SplitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Real(Vec<f64>),
    Class { labels: Vec<usize>, names: Vec<String> },
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Real(v) => v.len(),
            Target::Class { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Target {
        match self {
            Target::Real(v) => Target::Real(rows.iter().map(|&i| v[i]).collect()),
            Target::Class { labels, names } => Target::Class {
                labels: rows.iter().map(|&i| labels[i]).collect(),
                names: names.clone(),
            },
        }
    }
}

/// Predictor matrix (samples x variables) and aligned targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    target: Target,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, target: Target, feature_names: Vec<String>) -> Result<Self> {
        if x.nrows() != target.len() {
            return Err(Error::invalid(format!(
                "{} rows of predictors but {} targets",
                x.nrows(),
                target.len()
            )));
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::invalid(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite predictor value"));
        }
        match &target {
            Target::Real(v) if v.iter().any(|t| !t.is_finite()) => {
                return Err(Error::invalid("non-finite target value"));
            }
            Target::Class { labels, names } => {
                if let Some(&bad) = labels.iter().find(|&&l| l >= names.len()) {
                    return Err(Error::invalid(format!(
                        "class index {bad} outside [0, {})",
                        names.len()
                    )));
                }
            }
            _ => {}
        }
        Ok(Dataset {
            x,
            target,
            feature_names,
        })
    }

    /// Convenience constructor with generated feature names `x0, x1, ...`.
    pub fn from_parts(x: DMatrix<f64>, target: Target) -> Result<Self> {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Dataset::new(x, target, names)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn task(&self) -> Task {
        match self.target {
            Target::Real(_) => Task::Regression,
            Target::Class { .. } => Task::Classification,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.x.ncols()
    }

    pub fn labels(&self) -> Result<&[usize]> {
        match &self.target {
            Target::Class { labels, .. } => Ok(labels),
            Target::Real(_) => Err(Error::invalid("dataset is not a classification task")),
        }
    }

    pub fn values(&self) -> Result<&[f64]> {
        match &self.target {
            Target::Real(v) => Ok(v),
            Target::Class { .. } => Err(Error::invalid("dataset is not a regression task")),
        }
    }

    pub fn class_names(&self) -> Option<&[String]> {
        match &self.target {
            Target::Class { names, .. } => Some(names),
            Target::Real(_) => None,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names().map_or(0, |n| n.len())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        if let Target::Class { labels, .. } = &self.target {
            for &l in labels {
                counts[l] += 1;
            }
        }
        counts
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows.iter()),
            target: self.target.select(rows),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Same targets, new predictors (e.g. after scaling or reduction).
    pub fn with_x(&self, x: DMatrix<f64>, feature_names: Vec<String>) -> Result<Dataset> {
        Dataset::new(x, self.target.clone(), feature_names)
    }

    pub fn with_target(&self, target: Target) -> Result<Dataset> {
        Dataset::new(self.x.clone(), target, self.feature_names.clone())
    }
}

pub const DEFAULT_SINC_SAMPLES: usize = 2048;

/// Unnormalized cardinal sine with its removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// `n` points drawn uniformly from [-pi, pi] with targets `sinc(x)`. Not normalized.
pub fn generate_sinc(n: usize, seed: u32) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sinc dataset needs at least one sample"));
    }
    let mut rng = SeededRng::new(seed);
    let pi = std::f64::consts::PI;
    let xs: Vec<f64> = (0..n).map(|_| rng.uniform(-pi, pi)).collect();
    let ys = xs.iter().map(|&x| sinc(x)).collect();
    Dataset::new(
        DMatrix::from_column_slice(n, 1, &xs),
        Target::Real(ys),
        vec!["x".into()],
    )
}
