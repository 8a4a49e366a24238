//! How faithful is the weight-sharing proxy? Pearson correlation between
//! supernet validation accuracy and from-scratch test accuracy over a set of
//! schemes.

use crate::error::{Error, Result};
use crate::scheme::ConnectionScheme;
use crate::supernet::{scratch_train, Supernet, ToyDataset};
use serde::{Deserialize, Serialize};

/// Pearson correlation coefficient. Errors when either series is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Shape {
            context: "correlation series",
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidConfig("correlation needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub r: f64,
    pub schemes: Vec<ConnectionScheme>,
    pub proxy: Vec<f64>,
    pub scratch: Vec<f64>,
}

/// Evaluate every scheme through the pretrained supernet (validation accuracy)
/// and from scratch (test accuracy after the configured budget), then
/// correlate the two series. All scratch runs share `scratch_seed` so the
/// comparison across schemes is paired.
pub fn proxy_correlation(
    net: &Supernet,
    schemes: &[ConnectionScheme],
    data: &ToyDataset,
    scratch_seed: u64,
) -> Result<CorrelationReport> {
    if schemes.len() < 3 {
        return Err(Error::InvalidConfig(
            "proxy correlation needs at least three schemes".into(),
        ));
    }
    let mut proxy = Vec::with_capacity(schemes.len());
    let mut scratch = Vec::with_capacity(schemes.len());
    for scheme in schemes {
        proxy.push(net.proxy_eval(scheme, data)?);
        scratch.push(scratch_train(net.config(), scheme, data, scratch_seed)?);
    }
    Ok(CorrelationReport {
        r: pearson(&proxy, &scratch)?,
        schemes: schemes.to_vec(),
        proxy,
        scratch,
    })
}
