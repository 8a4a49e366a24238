//! Reward environments. An environment maps a connection scheme to its
//! performance reward; this module also owns the weighted reward combination
//! and the wire protocol for serving evaluations out of process.

mod external;
mod planted;
pub mod protocol;

pub use external::{Endpoint, ExternalEvaluator};
pub use planted::{PlantedConfig, PlantedEnv};

use crate::error::{Error, Result};
use crate::scheme::ConnectionScheme;
use serde::{Deserialize, Serialize};

/// Coefficients weighting the sparsity, performance, and novelty terms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RewardWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for RewardWeights {
    /// Performance dominates, sparsity tie-breaks, novelty perturbs.
    fn default() -> Self {
        RewardWeights {
            lambda1: 0.5,
            lambda2: 1.0,
            lambda3: 0.1,
        }
    }
}

impl RewardWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let w = RewardWeights {
            lambda1,
            lambda2,
            lambda3,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2, self.lambda3];
        if all.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidConfig(
                "reward weights must be finite and nonnegative".into(),
            ));
        }
        if all.iter().all(|l| *l == 0.0) {
            return Err(Error::InvalidConfig(
                "at least one reward weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The three reward terms for one scheme and their weighted total.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RewardBreakdown {
    pub g_spa: f64,
    pub g_val: f64,
    pub g_rnd: f64,
    pub total: f64,
}

/// `total = lambda1 * g_spa + lambda2 * g_val + lambda3 * g_rnd`.
pub fn combine_reward(weights: &RewardWeights, g_spa: f64, g_val: f64, g_rnd: f64) -> Result<RewardBreakdown> {
    weights.validate()?;
    if !g_spa.is_finite() || !g_val.is_finite() || !g_rnd.is_finite() {
        return Err(Error::NonFinite {
            context: "reward terms",
        });
    }
    Ok(RewardBreakdown {
        g_spa,
        g_val,
        g_rnd,
        total: weights.lambda1 * g_spa + weights.lambda2 * g_val + weights.lambda3 * g_rnd,
    })
}

/// Something that can score a scheme's performance in [0, 1].
pub trait Evaluator {
    /// Number of blocks the evaluator expects.
    fn m(&self) -> usize;

    /// Performance reward used inside the live search loop. May be noisy.
    fn eval(&mut self, scheme: &ConnectionScheme) -> Result<f64>;

    /// Deterministic value used for rankings and best-seen tracking.
    /// Defaults to [`Evaluator::eval`] for environments that are already pure.
    fn eval_true(&mut self, scheme: &ConnectionScheme) -> Result<f64> {
        self.eval(scheme)
    }

    /// Both values with the minimum number of evaluations. Environments where
    /// `eval` is already deterministic should reuse a single evaluation.
    fn eval_both(&mut self, scheme: &ConnectionScheme) -> Result<(f64, f64)> {
        let live = self.eval(scheme)?;
        let truth = self.eval_true(scheme)?;
        Ok((live, truth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn combine_reward_arithmetic() {
        let w = RewardWeights::new(1.0, 1.0, 1.0).unwrap();
        let b = combine_reward(&w, 0.5, 0.76, 0.1).unwrap();
        assert!((b.total - 1.36).abs() < 1e-12);
    }

    #[test]
    fn combine_reward_passthrough() {
        let w = RewardWeights::new(0.0, 1.0, 0.0).unwrap();
        let b = combine_reward(&w, 0.3, 0.62, 5.0).unwrap();
        assert_eq!(b.total, 0.62);
    }

    #[test]
    fn sparsity_only_all_zero_scheme_scores_one() {
        let w = RewardWeights::new(1.0, 0.0, 0.0).unwrap();
        let scheme = ConnectionScheme::zeros(&[6, 6, 6]);
        let b = combine_reward(&w, crate::scheme::sparsity_reward(&scheme), 0.0, 0.0).unwrap();
        assert_eq!(b.total, 1.0);
    }

    #[test]
    fn non_finite_input_rejected() {
        let w = RewardWeights::default();
        assert!(matches!(
            combine_reward(&w, f64::NAN, 0.0, 0.0),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn all_zero_weights_rejected() {
        assert!(RewardWeights::new(0.0, 0.0, 0.0).is_err());
        assert!(RewardWeights::new(-0.1, 1.0, 0.0).is_err());
    }

    proptest! {
        /// Scaling every input scales the total exactly.
        #[test]
        fn combine_reward_is_linear(
            spa in -1.0f64..1.0,
            val in -1.0f64..1.0,
            rnd in -1.0f64..1.0,
            factor in -4.0f64..4.0,
        ) {
            let w = RewardWeights::default();
            let base = combine_reward(&w, spa, val, rnd).unwrap();
            let scaled = combine_reward(&w, factor * spa, factor * val, factor * rnd).unwrap();
            prop_assert!((scaled.total - factor * base.total).abs() < 1e-9);
        }

        /// The stored total always satisfies the defining identity.
        #[test]
        fn breakdown_total_identity(
            spa in 0.0f64..1.0,
            val in 0.0f64..1.0,
            rnd in 0.0f64..10.0,
            l1 in 0.0f64..2.0,
            l2 in 0.01f64..2.0,
            l3 in 0.0f64..2.0,
        ) {
            let w = RewardWeights::new(l1, l2, l3).unwrap();
            let b = combine_reward(&w, spa, val, rnd).unwrap();
            prop_assert!((b.total - (l1 * spa + l2 * val + l3 * rnd)).abs() < 1e-12);
        }
    }
}
