//! Inference-latency harness: relative wall-clock increment of a connection
//! scheme over the unconnected network, `(t_with - t_without) / t_without * 100`.
//!
//! One measurement times `reps` consecutive forwards of the whole batch, so
//! each timed section is long enough for the clock to resolve. Sections
//! alternate between the measured scheme and the all-zero scheme so slow
//! drift cancels, and both sides take the median over a fixed number of
//! sections.

use super::{Supernet, SupernetConfig};
use crate::error::{Error, Result};
use crate::scheme::ConnectionScheme;
use crate::seed::{rng, Stream};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::hint::black_box;
use std::time::Instant;

/// Timed sections per side; the reported time is their median.
const TIMED_SECTIONS: usize = 12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub scheme: String,
    pub increment_pct: f64,
    pub batch: usize,
    pub reps: usize,
    pub with_median_s: f64,
    pub without_median_s: f64,
}

/// Pure arithmetic of the relative increment, in percent.
pub fn relative_increment_pct(with_time: f64, without_time: f64) -> f64 {
    (with_time - without_time) / without_time * 100.0
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Wall-clock seconds for `reps` forwards of the whole batch.
fn time_section(
    net: &Supernet,
    scheme: &ConnectionScheme,
    inputs: &[Vec<f64>],
    reps: usize,
) -> Result<f64> {
    let start = Instant::now();
    let mut checksum = 0.0;
    for _ in 0..reps {
        for input in inputs {
            let scores = net.forward_sample(scheme, input)?;
            checksum += scores[0];
        }
    }
    black_box(checksum);
    Ok(start.elapsed().as_secs_f64())
}

/// Measure the relative inference-time increment of `scheme` over the
/// all-zero scheme on a freshly built network with `batch` random inputs,
/// forwarding the batch `reps` times per timed section.
pub fn time_increment(
    config: &SupernetConfig,
    scheme: &ConnectionScheme,
    batch: usize,
    reps: usize,
    seed: u64,
) -> Result<BenchResult> {
    if reps == 0 || batch == 0 {
        return Err(Error::InvalidConfig("bench needs batch >= 1 and reps >= 1".into()));
    }
    let net = Supernet::new(config, &mut rng(seed, Stream::SupernetInit))?;
    if scheme.m() != net.m() {
        return Err(Error::Shape {
            context: "bench scheme",
            expected: net.m(),
            actual: scheme.m(),
        });
    }
    let mut r = rng(seed, Stream::Bench);
    let dim = config.stage_widths[0];
    let inputs: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let zero = ConnectionScheme::zeros(&config.stage_sizes);

    time_section(&net, scheme, &inputs, reps)?;
    time_section(&net, &zero, &inputs, reps)?;
    let mut with_times = Vec::with_capacity(TIMED_SECTIONS);
    let mut without_times = Vec::with_capacity(TIMED_SECTIONS);
    for section in 0..TIMED_SECTIONS {
        // Alternate which side goes first so time-correlated drift cancels.
        if section % 2 == 0 {
            with_times.push(time_section(&net, scheme, &inputs, reps)?);
            without_times.push(time_section(&net, &zero, &inputs, reps)?);
        } else {
            without_times.push(time_section(&net, &zero, &inputs, reps)?);
            with_times.push(time_section(&net, scheme, &inputs, reps)?);
        }
    }
    let with_median_s = median(with_times);
    let without_median_s = median(without_times);
    Ok(BenchResult {
        scheme: scheme.encode(),
        increment_pct: relative_increment_pct(with_median_s, without_median_s),
        batch,
        reps,
        with_median_s,
        without_median_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increment_arithmetic() {
        // A clock reading 1.2x the baseline is a 20% increment.
        assert!((relative_increment_pct(1.2, 1.0) - 20.0).abs() < 1e-12);
        assert_eq!(relative_increment_pct(1.0, 1.0), 0.0);
        assert!((relative_increment_pct(0.9, 1.0) + 10.0).abs() < 1e-12);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn zero_scheme_self_increment_is_jitter_bounded() {
        let config = SupernetConfig::default();
        let zero = ConnectionScheme::zeros(&config.stage_sizes);
        let result = time_increment(&config, &zero, 16, 30, 0).unwrap();
        assert!(
            result.increment_pct.abs() < 2.0,
            "self increment {}%",
            result.increment_pct
        );
    }

    #[test]
    fn connected_scheme_costs_more() {
        let config = SupernetConfig::default();
        let ones = ConnectionScheme::ones(&config.stage_sizes);
        let result = time_increment(&config, &ones, 16, 30, 0).unwrap();
        assert!(result.increment_pct > 2.0, "increment {}%", result.increment_pct);
    }

    #[test]
    fn bench_rejects_zero_reps() {
        let config = SupernetConfig::default();
        let zero = ConnectionScheme::zeros(&config.stage_sizes);
        assert!(time_increment(&config, &zero, 8, 0, 0).is_err());
    }
}
