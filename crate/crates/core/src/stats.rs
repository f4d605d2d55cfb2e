//! Correlation and two-sample tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn mean_var(a: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let m = a.iter().sum::<f64>() / n;
    let v = a.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn check(a: &[f64], min: usize, what: &str) -> Result<()> {
    if a.len() < min {
        return Err(Error::InvalidInput(format!("{what} needs at least {min} values, got {}", a.len())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} input contains non-finite values")));
    }
    Ok(())
}

pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    check(a, 3, "pearson_r")?;
    check(b, 3, "pearson_r")?;
    // Rounding in the mean can leave a tiny variance for constant input.
    if a.iter().all(|&x| x == a[0]) {
        return Err(Error::ZeroVariance { column: 0 });
    }
    if b.iter().all(|&y| y == b[0]) {
        return Err(Error::ZeroVariance { column: 1 });
    }
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let sa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>().sqrt();
    let sb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum::<f64>().sqrt();
    Ok((cov / (sa * sb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    #[serde(with = "crate::serde_float")]
    pub t: f64,
    pub dof: f64,
    /// Two-sided.
    #[serde(with = "crate::serde_float")]
    pub p_value: f64,
}

fn two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    2.0 * dist.sf(t.abs())
}

/// Unequal-variance t statistic with Welch–Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TTest> {
    check(a, 2, "welch_t")?;
    check(b, 2, "welch_t")?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    if sa + sb == 0.0 {
        return Err(Error::ZeroVariance { column: 0 });
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let dof = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTest {
        t,
        dof,
        p_value: two_sided_p(t, dof),
    })
}

/// Paired t-test on `a − b`.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    check(&d, 2, "paired_t")?;
    let (m, v) = mean_var(&d);
    let n = d.len() as f64;
    let dof = n - 1.0;
    if d.iter().all(|&x| x == d[0]) {
        // Identical differences: the test degenerates to certainty unless they are all zero.
        let (t, p) = if d[0] == 0.0 { (0.0, 1.0) } else { (f64::INFINITY.copysign(d[0]), 0.0) };
        return Ok(TTest { t, dof, p_value: p });
    }
    let t = m / (v / n).sqrt();
    Ok(TTest {
        t,
        dof,
        p_value: two_sided_p(t, dof),
    })
}
