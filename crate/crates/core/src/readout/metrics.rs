use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!("{a} predictions for {b} targets")));
    }
    if a == 0 {
        return Err(Error::InvalidInput("metric over an empty set".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((s / pred.len() as f64).sqrt())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: DMatrix<u64>,
    /// Row-normalized; rows without support stay zero.
    pub normalized: DMatrix<f64>,
    pub empty_rows: Vec<usize>,
}

pub fn confusion(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    check_lengths(pred.len(), truth.len())?;
    let mut counts = DMatrix::<u64>::zeros(n_classes, n_classes);
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::OutOfRange {
                index: p.max(t),
                len: n_classes,
            });
        }
        counts[(t, p)] += 1;
    }
    let mut normalized = DMatrix::zeros(n_classes, n_classes);
    let mut empty_rows = Vec::new();
    for r in 0..n_classes {
        let total: u64 = counts.row(r).iter().sum();
        if total == 0 {
            empty_rows.push(r);
            continue;
        }
        for c in 0..n_classes {
            normalized[(r, c)] = counts[(r, c)] as f64 / total as f64;
        }
    }
    Ok(ConfusionMatrix {
        counts,
        normalized,
        empty_rows,
    })
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.nrows()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Row percentages rounded to whole numbers, as displayed.
    pub fn percent_rounded(&self) -> DMatrix<u32> {
        self.normalized.map(|v| (v * 100.0).round() as u32)
    }

    /// `true,predicted,count,fraction` rows, with class names when given.
    pub fn write_csv<W: std::io::Write>(&self, names: Option<&[String]>, mut w: W) -> Result<()> {
        let name = |k: usize| names.and_then(|n| n.get(k)).cloned().unwrap_or_else(|| k.to_string());
        writeln!(w, "true,predicted,count,fraction")?;
        for r in 0..self.n_classes() {
            for c in 0..self.n_classes() {
                writeln!(w, "{},{},{},{}", name(r), name(c), self.counts[(r, c)], self.normalized[(r, c)])?;
            }
        }
        Ok(())
    }
}
