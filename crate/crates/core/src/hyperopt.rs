//! Derivative-free minimization over a few bounded parameters: grid, seeded
//! random, and coarse grid followed by local refinement.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const MAX_FREE_PARAMS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Range { lower: f64, upper: f64 },
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub bound: Bound,
}

/// Ordered parameters; the objective receives values in this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Param>", into = "Vec<Param>")]
pub struct SearchSpace {
    params: Vec<Param>,
}

impl TryFrom<Vec<Param>> for SearchSpace {
    type Error = Error;

    fn try_from(params: Vec<Param>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate parameter {}", p.name)));
            }
            match p.bound {
                Bound::Range { lower, upper } if !(lower < upper && lower.is_finite() && upper.is_finite()) => {
                    return Err(Error::InvalidConfig(format!(
                        "parameter {} needs finite lower < upper, got [{lower}, {upper}]",
                        p.name
                    )))
                }
                Bound::Fixed { value } if !value.is_finite() => {
                    return Err(Error::InvalidConfig(format!("parameter {} is not finite", p.name)))
                }
                _ => {}
            }
        }
        let free = params.iter().filter(|p| matches!(p.bound, Bound::Range { .. })).count();
        if free == 0 || free > MAX_FREE_PARAMS {
            return Err(Error::InvalidConfig(format!(
                "search needs 1..={MAX_FREE_PARAMS} free parameters, got {free}"
            )));
        }
        Ok(SearchSpace { params })
    }
}

impl From<SearchSpace> for Vec<Param> {
    fn from(s: SearchSpace) -> Self {
        s.params
    }
}

impl SearchSpace {
    pub fn new(params: Vec<Param>) -> Result<Self> {
        params.try_into()
    }

    /// Convenience for `(name, lower, upper)` free parameters and
    /// `(name, value)` fixed ones.
    pub fn build(free: &[(&str, f64, f64)], fixed: &[(&str, f64)]) -> Result<Self> {
        let mut params: Vec<Param> = free
            .iter()
            .map(|&(n, lower, upper)| Param {
                name: n.into(),
                bound: Bound::Range { lower, upper },
            })
            .collect();
        params.extend(fixed.iter().map(|&(n, value)| Param {
            name: n.into(),
            bound: Bound::Fixed { value },
        }));
        Self::new(params)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    fn free(&self) -> Vec<(usize, f64, f64)> {
        self.params
            .iter()
            .enumerate()
            .filter_map(|(i, p)| match p.bound {
                Bound::Range { lower, upper } => Some((i, lower, upper)),
                Bound::Fixed { .. } => None,
            })
            .collect()
    }

    fn assemble(&self, free_values: &[f64]) -> Vec<f64> {
        let mut it = free_values.iter();
        self.params
            .iter()
            .map(|p| match p.bound {
                Bound::Range { .. } => *it.next().expect("one value per free parameter"),
                Bound::Fixed { value } => value,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Grid,
    Random,
    #[default]
    CoarseToFine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub params: Vec<f64>,
    /// +∞ when the objective failed.
    #[serde(with = "crate::serde_float")]
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub names: Vec<String>,
    pub best_params: Vec<f64>,
    #[serde(with = "crate::serde_float")]
    pub best_objective: f64,
    pub log: Vec<Evaluation>,
}

impl OptResult {
    pub fn best(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.best_params[i])
    }

    pub fn write_log_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},objective", self.names.join(","))?;
        for e in &self.log {
            let cells: Vec<String> = e.params.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", cells.join(","), e.objective)?;
        }
        Ok(())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Largest `n` with `n^d <= budget`.
fn per_dim(budget: usize, d: usize) -> usize {
    let mut n = 1;
    while (n + 1usize).checked_pow(d as u32).is_some_and(|v| v <= budget) {
        n += 1;
    }
    n
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

struct Runner<'a, F> {
    space: &'a SearchSpace,
    objective: &'a F,
    log: Vec<Evaluation>,
    seen: HashSet<Vec<u64>>,
    budget: usize,
}

impl<F> Runner<'_, F>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    fn remaining(&self) -> usize {
        self.budget - self.log.len()
    }

    /// Evaluates new points (duplicates skipped, truncated to the budget)
    /// concurrently and appends them in the given order.
    fn batch(&mut self, points: Vec<Vec<f64>>) {
        let mut fresh = Vec::new();
        for p in points {
            if fresh.len() == self.remaining() {
                break;
            }
            let full = self.space.assemble(&p);
            if self.seen.insert(full.iter().map(|v| v.to_bits()).collect()) {
                fresh.push(full);
            }
        }
        let obj = self.objective;
        let scored: Vec<Evaluation> = fresh
            .into_par_iter()
            .map(|params| {
                let objective = match obj(&params) {
                    Ok(v) if !v.is_nan() => v,
                    Ok(_) => f64::INFINITY,
                    Err(e) => {
                        log::warn!("objective failed at {params:?}: {e}");
                        f64::INFINITY
                    }
                };
                Evaluation { params, objective }
            })
            .collect();
        self.log.extend(scored);
    }

    fn best(&self) -> &Evaluation {
        self.log
            .iter()
            .reduce(|a, b| if b.objective < a.objective { b } else { a })
            .expect("at least one evaluation")
    }
}

/// Minimizes `objective` with at most `budget` evaluations. Deterministic
/// for a given seed and strategy.
pub fn optimize<F>(objective: F, space: &SearchSpace, budget: usize, strategy: Strategy, seed: u32) -> Result<OptResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if budget == 0 {
        return Err(Error::InvalidConfig("budget must be at least 1".into()));
    }
    let free = space.free();
    let d = free.len();
    let mut run = Runner {
        space,
        objective: &objective,
        log: Vec::new(),
        seen: HashSet::new(),
        budget,
    };
    let grid = |b: usize| -> Vec<Vec<f64>> {
        let n = per_dim(b, d);
        cartesian(&free.iter().map(|&(_, lo, hi)| linspace(lo, hi, n)).collect::<Vec<_>>())
    };
    match strategy {
        Strategy::Grid => run.batch(grid(budget)),
        Strategy::Random => {
            let mut rng = SeededRng::new(seed);
            let pts = (0..budget)
                .map(|_| free.iter().map(|&(_, lo, hi)| rng.uniform(lo, hi)).collect())
                .collect();
            run.batch(pts);
        }
        Strategy::CoarseToFine => {
            let coarse_n = per_dim(budget.div_ceil(2), d);
            run.batch(grid(budget.div_ceil(2)));
            // Box half-widths start at one coarse spacing and halve each round.
            let mut half: Vec<f64> = free
                .iter()
                .map(|&(_, lo, hi)| if coarse_n > 1 { (hi - lo) / (coarse_n - 1) as f64 } else { (hi - lo) / 2.0 })
                .collect();
            let m = if d == 1 { 5 } else { 3 };
            let mut stalls = 0;
            while run.remaining() > 0 && stalls < 64 {
                let center: Vec<f64> = free.iter().map(|&(i, ..)| run.best().params[i]).collect();
                let axes: Vec<Vec<f64>> = free
                    .iter()
                    .enumerate()
                    .map(|(j, &(_, lo, hi))| {
                        linspace(center[j] - half[j], center[j] + half[j], m)
                            .into_iter()
                            .map(|v| v.clamp(lo, hi))
                            .collect()
                    })
                    .collect();
                let before = run.log.len();
                run.batch(cartesian(&axes));
                if run.log.len() == before {
                    stalls += 1;
                }
                half.iter_mut().for_each(|h| *h *= 0.5);
            }
        }
    }
    let best = run.best().clone();
    Ok(OptResult {
        names: space.names().into_iter().map(String::from).collect(),
        best_params: best.params,
        best_objective: best.objective,
        log: run.log,
    })
}

/// Two-parameter search for a symmetric objective; the reported pair is
/// ordered so the first value is not larger than the second.
pub fn optimize_dual_rho<F>(objective: F, space: &SearchSpace, budget: usize, strategy: Strategy, seed: u32) -> Result<OptResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let free = space.free();
    if free.len() != 2 {
        return Err(Error::InvalidConfig("dual search needs exactly two free parameters".into()));
    }
    let mut r = optimize(objective, space, budget, strategy, seed)?;
    let (a, b) = (free[0].0, free[1].0);
    if r.best_params[a] > r.best_params[b] {
        r.best_params.swap(a, b);
    }
    Ok(r)
}
