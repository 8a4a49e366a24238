//! Search baselines: uniform random draws and the periodic heuristic that
//! connects every N-th block.

use crate::env::{Evaluator, RewardWeights};
use crate::error::{Error, Result};
use crate::scheme::{sample_bernoulli, sparsity_reward, ConnectionScheme};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One scored scheme in a baseline distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredScheme {
    pub scheme: ConnectionScheme,
    pub g_spa: f64,
    pub g_val: f64,
    pub total: f64,
}

/// The random baseline: all draws with their deterministic scores, plus the
/// index of the best one.
#[derive(Debug, Clone)]
pub struct RandomBaseline {
    pub scores: Vec<ScoredScheme>,
    best_index: usize,
}

impl RandomBaseline {
    pub fn best(&self) -> &ScoredScheme {
        &self.scores[self.best_index]
    }

    pub fn mean_total(&self) -> f64 {
        self.scores.iter().map(|s| s.total).sum::<f64>() / self.scores.len() as f64
    }
}

/// Draw `n` i.i.d. Bernoulli(0.5) schemes and score them deterministically
/// (novelty excluded, as in the brute-force ranking).
pub fn baseline_random<R: Rng>(
    env: &mut dyn Evaluator,
    weights: &RewardWeights,
    stage_sizes: &[usize],
    draws: usize,
    rng: &mut R,
) -> Result<RandomBaseline> {
    weights.validate()?;
    if draws == 0 {
        return Err(Error::InvalidConfig("need at least one draw".into()));
    }
    let mut scores = Vec::with_capacity(draws);
    let mut best_index = 0;
    for i in 0..draws {
        let scheme = sample_bernoulli(stage_sizes, 0.5, rng)?;
        let g_spa = sparsity_reward(&scheme);
        let g_val = env.eval_true(&scheme)?;
        let total = weights.lambda1 * g_spa + weights.lambda2 * g_val;
        scores.push(ScoredScheme {
            scheme,
            g_spa,
            g_val,
            total,
        });
        if total > scores[best_index].total {
            best_index = i;
        }
    }
    Ok(RandomBaseline { scores, best_index })
}

/// Periodic heuristic: block `i` (1-based) connects iff
/// `(i - 1) mod period == offset`.
pub fn baseline_hsp(stage_sizes: &[usize], period: usize, offset: usize) -> Result<ConnectionScheme> {
    let m: usize = stage_sizes.iter().sum();
    if period == 0 || period > m {
        return Err(Error::InvalidConfig(format!(
            "period {period} outside 1..={m}"
        )));
    }
    if offset >= period {
        return Err(Error::InvalidConfig(format!(
            "offset {offset} must be below period {period}"
        )));
    }
    let bits = (0..m).map(|i| i % period == offset).collect();
    ConnectionScheme::new(bits, stage_sizes.to_vec())
}
