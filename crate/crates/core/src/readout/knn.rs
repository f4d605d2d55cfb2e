use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

/// Euclidean k-nearest-neighbour vote. Equal distances are resolved by
/// training order; tied votes go to the smaller class index.
pub fn knn_predict(train_x: &DMatrix<f64>, train_labels: &[usize], x: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    let n = train_x.nrows();
    if train_labels.len() != n {
        return Err(Error::InvalidInput(format!("{n} training rows but {} labels", train_labels.len())));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k must be in 1..={n}, got {k}")));
    }
    if x.ncols() != train_x.ncols() {
        return Err(Error::InvalidInput("query and training widths differ".into()));
    }
    let n_classes = train_labels.iter().max().map_or(0, |m| m + 1);
    let out = (0..x.nrows())
        .into_par_iter()
        .map(|q| {
            let query = x.row(q);
            let mut d: Vec<(f64, usize)> = train_x
                .row_iter()
                .enumerate()
                .map(|(i, r)| ((r - query).norm_squared(), i))
                .collect();
            d.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
            let mut votes = vec![0usize; n_classes];
            for &(_, i) in &d[..k] {
                votes[train_labels[i]] += 1;
            }
            let top = *votes.iter().max().expect("non-empty");
            votes.iter().position(|&v| v == top).expect("max present")
        })
        .collect();
    Ok(out)
}
