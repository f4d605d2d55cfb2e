use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u32,
}

fn default_fraction() -> f64 {
    0.8
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: default_fraction(),
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn new(train_fraction: f64, seed: u32) -> Result<Self> {
        let c = SplitConfig {
            train_fraction,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u32) -> Self {
        SplitConfig { seed, ..self }
    }
}

/// Row indices of a train/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle then partition. The permutation's head becomes the test
/// set and the remainder the training set, which reproduces the partitions
/// of the common `train_test_split(random_state=seed)` convention.
pub fn split_indices(n: usize, cfg: &SplitConfig) -> Result<Split> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::EmptyPartition("dataset is empty".into()));
    }
    // Guard against 0.7 * 150 = 104.999...
    let n_train = (cfg.train_fraction * n as f64 + 1e-9).floor() as usize;
    let n_test = n - n_train;
    if n_train == 0 || n_test == 0 {
        return Err(Error::EmptyPartition(format!(
            "fraction {} of {n} samples leaves an empty side",
            cfg.train_fraction
        )));
    }
    let perm = SeededRng::new(cfg.seed).permutation(n);
    Ok(Split {
        test: perm[..n_test].to_vec(),
        train: perm[n_test..].to_vec(),
    })
}

pub fn train_test_split(ds: &Dataset, cfg: &SplitConfig) -> Result<(Dataset, Dataset)> {
    let s = split_indices(ds.n_samples(), cfg)?;
    Ok((ds.select_rows(&s.train), ds.select_rows(&s.test)))
}
