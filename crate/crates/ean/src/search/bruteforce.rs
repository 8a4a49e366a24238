//! Exhaustive ground-truth ranking of every scheme on a deterministic
//! objective. The novelty term is excluded: it depends on predictor history,
//! not on the scheme alone.

use crate::env::{Evaluator, RewardWeights};
use crate::error::{Error, Result};
use crate::scheme::{sparsity_reward, ConnectionScheme};

/// Enumeration is capped at 2^24 schemes.
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// One ranked entry, materialized on demand.
#[derive(Debug, Clone)]
pub struct RankedScheme {
    /// 1-based position in the ranking.
    pub rank: usize,
    pub scheme: ConnectionScheme,
    pub g_spa: f64,
    pub g_val: f64,
    pub total: f64,
}

/// Full ranking over all `2^m` schemes, best first. Ties break toward the
/// lexicographically smaller scheme string.
#[derive(Debug)]
pub struct BruteForce {
    stage_sizes: Vec<usize>,
    weights: RewardWeights,
    /// `(scheme index, deterministic g_val)`, sorted best-first. Bit `m-1-i`
    /// of the index is block `i`, so ascending index order is lexicographic
    /// order of the encoded bits.
    entries: Vec<(u64, f64)>,
}

fn scheme_from_index(index: u64, m: usize, stage_sizes: &[usize]) -> ConnectionScheme {
    let bits = (0..m).map(|i| (index >> (m - 1 - i)) & 1 == 1).collect();
    ConnectionScheme::new(bits, stage_sizes.to_vec()).expect("index width matches")
}

impl BruteForce {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn total_of(&self, index: u64, g_val: f64) -> f64 {
        let m: usize = self.stage_sizes.iter().sum();
        let g_spa = 1.0 - index.count_ones() as f64 / m as f64;
        self.weights.lambda1 * g_spa + self.weights.lambda2 * g_val
    }

    /// Entry at 0-based ranking position.
    pub fn entry(&self, position: usize) -> RankedScheme {
        let m: usize = self.stage_sizes.iter().sum();
        let (index, g_val) = self.entries[position];
        let scheme = scheme_from_index(index, m, &self.stage_sizes);
        RankedScheme {
            rank: position + 1,
            g_spa: sparsity_reward(&scheme),
            g_val,
            total: self.total_of(index, g_val),
            scheme,
        }
    }

    pub fn best(&self) -> RankedScheme {
        self.entry(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = RankedScheme> + '_ {
        (0..self.len()).map(|i| self.entry(i))
    }

    /// Total score at a 0-based ranking position; entry 9 is the score a
    /// scheme must reach to sit in the top ten.
    pub fn total_at(&self, position: usize) -> f64 {
        let (index, g_val) = self.entries[position];
        self.total_of(index, g_val)
    }
}

/// Score all `2^m` schemes with the deterministic environment value.
pub fn brute_force(
    env: &mut dyn Evaluator,
    weights: &RewardWeights,
    stage_sizes: &[usize],
) -> Result<BruteForce> {
    weights.validate()?;
    let m: usize = stage_sizes.iter().sum();
    if m == 0 {
        return Err(Error::InvalidConfig("empty stage sizes".into()));
    }
    if m > BRUTE_FORCE_LIMIT {
        return Err(Error::EnumerationBound {
            m,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if env.m() != m {
        return Err(Error::Shape {
            context: "brute force environment",
            expected: m,
            actual: env.m(),
        });
    }
    let count = 1u64 << m;
    let mut entries = Vec::with_capacity(count as usize);
    for index in 0..count {
        let scheme = scheme_from_index(index, m, stage_sizes);
        entries.push((index, env.eval_true(&scheme)?));
    }
    let ranking = BruteForce {
        stage_sizes: stage_sizes.to_vec(),
        weights: *weights,
        entries,
    };
    let mut sorted = ranking.entries.clone();
    sorted.sort_by(|a, b| {
        ranking
            .total_of(b.0, b.1)
            .total_cmp(&ranking.total_of(a.0, a.1))
            .then(a.0.cmp(&b.0))
    });
    Ok(BruteForce {
        entries: sorted,
        ..ranking
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{PlantedConfig, PlantedEnv};

    #[test]
    fn constant_landscape_orders_by_sparsity() {
        let mut env =
            PlantedEnv::from_parts(vec![2], vec![0.0, 0.0], vec![], 0.5, 0.0, 0).unwrap();
        let weights = RewardWeights::new(1.0, 1.0, 0.0).unwrap();
        let ranking = brute_force(&mut env, &weights, &[2]).unwrap();
        let order: Vec<String> = ranking.iter().map(|e| e.scheme.encode()).collect();
        assert_eq!(order, vec!["00", "01", "10", "11"]);
        assert_eq!(ranking.len(), 4);
    }

    /// Second, independently coded enumerator over a small planted landscape.
    #[test]
    fn top_scheme_matches_independent_enumeration() {
        let mut env = PlantedEnv::generate(&PlantedConfig {
            stage_sizes: vec![4],
            interactions: 2,
            noise_std: 0.0,
            seed: 9,
        })
        .unwrap();
        let weights = RewardWeights::default();
        let ranking = brute_force(&mut env, &weights, &[4]).unwrap();

        let mut best: Option<(f64, String)> = None;
        for b3 in 0..2u8 {
            for b2 in 0..2u8 {
                for b1 in 0..2u8 {
                    for b0 in 0..2u8 {
                        let text: String = [b0, b1, b2, b3]
                            .iter()
                            .map(|b| if *b == 1 { '1' } else { '0' })
                            .collect();
                        let scheme = ConnectionScheme::decode(&text).unwrap();
                        let total = weights.lambda1 * sparsity_reward(&scheme)
                            + weights.lambda2 * env.eval_noiseless(&scheme).unwrap();
                        let better = match &best {
                            None => true,
                            Some((bt, bs)) => {
                                total > *bt || (total == *bt && text < *bs)
                            }
                        };
                        if better {
                            best = Some((total, text));
                        }
                    }
                }
            }
        }
        let (expected_total, expected_scheme) = best.unwrap();
        let top = ranking.best();
        assert_eq!(top.scheme.encode(), expected_scheme);
        assert!((top.total - expected_total).abs() < 1e-15);
    }

    #[test]
    fn ranking_length_is_two_to_the_m() {
        let mut env = PlantedEnv::generate(&PlantedConfig {
            stage_sizes: vec![3, 2],
            interactions: 2,
            noise_std: 0.0,
            seed: 1,
        })
        .unwrap();
        let ranking = brute_force(&mut env, &RewardWeights::default(), &[3, 2]).unwrap();
        assert_eq!(ranking.len(), 32);
        // Scores are nonincreasing down the ranking.
        let totals: Vec<f64> = (0..ranking.len()).map(|i| ranking.total_at(i)).collect();
        assert!(totals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn oversized_enumeration_is_rejected() {
        let mut env = PlantedEnv::generate(&PlantedConfig {
            stage_sizes: vec![25],
            interactions: 2,
            noise_std: 0.0,
            seed: 0,
        })
        .unwrap();
        let err = brute_force(&mut env, &RewardWeights::default(), &[25]).unwrap_err();
        assert!(matches!(err, Error::EnumerationBound { m: 25, limit: 24 }));
    }
}
