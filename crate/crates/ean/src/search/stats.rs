//! Small statistics helpers for the comparison analyses.

use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

/// One-sample, one-sided t-test of `mean(samples) > mu0`.
/// Returns `(t, p)` with `p` the right-tail probability.
pub fn t_test_greater(samples: &[f64], mu0: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InvalidConfig("t-test needs at least two samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) || !mu0.is_finite() {
        return Err(Error::NonFinite { context: "t-test input" });
    }
    let n = samples.len() as f64;
    let m = mean(samples);
    let sd = sample_std(samples);
    if sd == 0.0 {
        // Degenerate distribution: the comparison is decided by the means.
        return Ok(if m > mu0 {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 1.0)
        });
    }
    let t = (m - mu0) / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::InvalidConfig(format!("t distribution: {e}")))?;
    Ok((t, 1.0 - dist.cdf(t)))
}
