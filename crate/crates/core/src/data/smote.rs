use nalgebra::DMatrix;

use super::{Dataset, Target};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const DEFAULT_SMOTE_K: usize = 5;

/// Oversamples every class up to the majority count by interpolating between
/// a sample and one of its `k` nearest same-class neighbors. Original rows
/// come first and are untouched; synthetic rows follow, grouped by class.
pub fn smote_balance(ds: &Dataset, k: usize, seed: u32) -> Result<Dataset> {
    let labels = ds.labels()?;
    let names = ds.class_names().unwrap_or_default().to_vec();
    if k == 0 {
        return Err(Error::invalid("SMOTE needs k >= 1"));
    }
    let counts = ds.class_counts();
    let majority = counts.iter().copied().max().unwrap_or(0);
    let x = ds.x();
    let d = x.ncols();
    let mut rng = SeededRng::new(seed);

    let mut rows: Vec<f64> = Vec::new();
    let mut new_labels: Vec<usize> = Vec::new();
    for (class, &count) in counts.iter().enumerate() {
        let need = majority - count;
        if need == 0 || count == 0 {
            continue;
        }
        if count < 2 {
            return Err(Error::invalid(format!(
                "class `{}` has a single sample; SMOTE needs at least two",
                names[class]
            )));
        }
        let k_eff = if k >= count {
            log::warn!(
                "SMOTE k={k} >= size {count} of class `{}`; using k={}",
                names[class],
                count - 1
            );
            count - 1
        } else {
            k
        };
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let neighbors = nearest_within(x, &members, k_eff);
        for _ in 0..need {
            let base = rng.random_interval((count - 1) as u32) as usize;
            let nb = neighbors[base][rng.random_interval((k_eff - 1) as u32) as usize];
            let lambda = rng.random_sample();
            let (a, b) = (members[base], members[nb]);
            for j in 0..d {
                let xa = x[(a, j)];
                rows.push(xa + lambda * (x[(b, j)] - xa));
            }
            new_labels.push(class);
        }
    }

    let n_new = new_labels.len();
    let n = x.nrows();
    let synth = DMatrix::from_row_slice(n_new, d, &rows);
    let mut out = DMatrix::zeros(n + n_new, d);
    out.rows_mut(0, n).copy_from(x);
    out.rows_mut(n, n_new).copy_from(&synth);
    let mut all_labels = labels.to_vec();
    all_labels.extend(new_labels);
    Dataset::new(
        out,
        Target::Class {
            labels: all_labels,
            names,
        },
        ds.feature_names().to_vec(),
    )
}

/// For each member, positions (into `members`) of its `k` nearest other members.
fn nearest_within(x: &DMatrix<f64>, members: &[usize], k: usize) -> Vec<Vec<usize>> {
    members
        .iter()
        .enumerate()
        .map(|(p, &i)| {
            let mut dist: Vec<(f64, usize)> = members
                .iter()
                .enumerate()
                .filter(|&(q, _)| q != p)
                .map(|(q, &j)| ((x.row(i) - x.row(j)).norm_squared(), q))
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.into_iter().take(k).map(|(_, q)| q).collect()
        })
        .collect()
}
