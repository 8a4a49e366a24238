//! A synthetic reward landscape with planted per-block utilities and a few
//! pairwise interactions. It stands in for validation accuracy at desk scale:
//! cheap to evaluate, exhaustively enumerable, and deterministic per seed.

use super::Evaluator;
use crate::error::{Error, Result};
use crate::scheme::ConnectionScheme;
use crate::seed::{rng, Stream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Generation parameters for a random planted landscape.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlantedConfig {
    pub stage_sizes: Vec<usize>,
    /// Number of nonzero pairwise interaction terms.
    pub interactions: usize,
    /// Standard deviation of the evaluation noise in noisy mode.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            stage_sizes: vec![6, 6, 6],
            interactions: 4,
            noise_std: 0.01,
            seed: 0,
        }
    }
}

/// The landscape: `g_val(a) = clamp(base + sum_i u_i a_i
/// + sum_{i<j} J_ij a_i a_j (+ noise), 0, 1)`.
#[derive(Debug, Clone)]
pub struct PlantedEnv {
    stage_sizes: Vec<usize>,
    utilities: Vec<f64>,
    /// Sparse symmetric interactions, stored once per pair with `i < j`.
    interactions: Vec<(usize, usize, f64)>,
    base: f64,
    noise_std: f64,
    seed: u64,
    noise_rng: ChaCha8Rng,
}

impl PlantedEnv {
    /// Explicit landscape construction.
    pub fn from_parts(
        stage_sizes: Vec<usize>,
        utilities: Vec<f64>,
        interactions: Vec<(usize, usize, f64)>,
        base: f64,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self> {
        let m: usize = stage_sizes.iter().sum();
        if utilities.len() != m {
            return Err(Error::Shape {
                context: "planted utilities",
                expected: m,
                actual: utilities.len(),
            });
        }
        if interactions.iter().any(|&(i, j, _)| i >= j || j >= m) {
            return Err(Error::InvalidConfig(
                "interaction pairs must satisfy i < j < m".into(),
            ));
        }
        if !base.is_finite() || !noise_std.is_finite() || noise_std < 0.0 {
            return Err(Error::InvalidConfig("bad base or noise std".into()));
        }
        Ok(PlantedEnv {
            stage_sizes,
            utilities,
            interactions,
            base,
            noise_std,
            seed,
            noise_rng: rng(seed, Stream::EnvNoise),
        })
    }

    /// Draw a landscape from the seed. Utility magnitudes are uniform in
    /// `[1.0, 2.0]/m` with a 0.35 chance of being positive, so every block is
    /// decisively good or bad relative to a typical per-block sparsity cost
    /// while noiseless values stay inside the unit interval for all but
    /// pathological schemes. Interaction magnitudes are uniform in
    /// `[0.4, 1.0]/m` with random sign over random pairs.
    pub fn generate(config: &PlantedConfig) -> Result<Self> {
        let m: usize = config.stage_sizes.iter().sum();
        if m < 2 {
            return Err(Error::InvalidConfig("planted landscape needs m >= 2".into()));
        }
        let mut r = rng(config.seed, Stream::Dataset);
        let utilities: Vec<f64> = (0..m)
            .map(|_| {
                let magnitude = r.random_range(1.0..=2.0) / m as f64;
                if r.random_bool(0.35) {
                    magnitude
                } else {
                    -magnitude
                }
            })
            .collect();
        let mut interactions = Vec::with_capacity(config.interactions);
        let mut used = std::collections::HashSet::new();
        while interactions.len() < config.interactions {
            let i = r.random_range(0..m);
            let j = r.random_range(0..m);
            if i == j {
                continue;
            }
            let (lo, hi) = (i.min(j), i.max(j));
            if used.insert((lo, hi)) {
                let magnitude = r.random_range(0.4..=1.0) / m as f64;
                let signed = if r.random_bool(0.5) { magnitude } else { -magnitude };
                interactions.push((lo, hi, signed));
            }
        }
        Self::from_parts(
            config.stage_sizes.clone(),
            utilities,
            interactions,
            0.45,
            config.noise_std,
            config.seed,
        )
    }

    pub fn stage_sizes(&self) -> &[usize] {
        &self.stage_sizes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn interactions(&self) -> &[(usize, usize, f64)] {
        &self.interactions
    }

    fn check(&self, scheme: &ConnectionScheme) -> Result<()> {
        if scheme.m() != self.utilities.len() {
            return Err(Error::Shape {
                context: "planted evaluation scheme",
                expected: self.utilities.len(),
                actual: scheme.m(),
            });
        }
        Ok(())
    }

    /// Pure landscape value. Summation order is fixed (ascending block index,
    /// then the interaction list) so the value is identical across platforms.
    pub fn eval_noiseless(&self, scheme: &ConnectionScheme) -> Result<f64> {
        self.check(scheme)?;
        let mut value = self.base;
        for (i, &u) in self.utilities.iter().enumerate() {
            if scheme.bit(i) {
                value += u;
            }
        }
        for &(i, j, w) in &self.interactions {
            if scheme.bit(i) && scheme.bit(j) {
                value += w;
            }
        }
        Ok(value.clamp(0.0, 1.0))
    }

    /// Landscape value plus Gaussian noise, advancing the internal noise
    /// stream. Deterministic given the construction seed and call sequence.
    pub fn eval_noisy(&mut self, scheme: &ConnectionScheme) -> Result<f64> {
        let clean = self.eval_noiseless(scheme)?;
        if self.noise_std == 0.0 {
            return Ok(clean);
        }
        let normal = Normal::new(0.0, self.noise_std)
            .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;
        let noisy = clean + normal.sample(&mut self.noise_rng);
        Ok(noisy.clamp(0.0, 1.0))
    }
}

impl Evaluator for PlantedEnv {
    fn m(&self) -> usize {
        self.utilities.len()
    }

    fn eval(&mut self, scheme: &ConnectionScheme) -> Result<f64> {
        self.eval_noisy(scheme)
    }

    fn eval_true(&mut self, scheme: &ConnectionScheme) -> Result<f64> {
        self.eval_noiseless(scheme)
    }
}
