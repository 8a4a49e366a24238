//! Novelty bonus via random network distillation: a frozen randomly-initialized
//! target network and a trained predictor network both embed a scheme's bit
//! vector; their squared output distance is large for schemes the predictor has
//! not seen, and shrinks as the predictor is fit to them.

use crate::error::{Error, Result};
use crate::nn::{Activation, Direction, Mlp, OptimizerState};
use crate::scheme::ConnectionScheme;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Architecture and training hyperparameters for the distillation pair.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RndConfig {
    /// Hidden relu width of both networks.
    pub hidden_dim: usize,
    /// Output embedding width of both networks.
    pub embed_dim: usize,
    /// Adam step size for the predictor.
    pub learning_rate: f64,
    /// Divide bonuses by a running standard deviation. Off by default: the
    /// raw squared distance is used as-is.
    pub normalize: bool,
}

impl Default for RndConfig {
    fn default() -> Self {
        RndConfig {
            hidden_dim: 32,
            embed_dim: 16,
            learning_rate: 1e-3,
            normalize: false,
        }
    }
}

/// Welford accumulator for the optional bonus normalization.
#[derive(Debug, Clone, Default)]
struct RunningStd {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStd {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn std(&self) -> f64 {
        if self.count < 2 {
            return 1.0;
        }
        let v = self.m2 / (self.count - 1) as f64;
        if v > 0.0 {
            v.sqrt()
        } else {
            1.0
        }
    }
}

/// Frozen target plus trainable predictor.
#[derive(Debug, Clone)]
pub struct RndPair {
    target: Mlp,
    predictor: Mlp,
    optimizer: OptimizerState,
    normalize: bool,
    running: RunningStd,
}

impl RndPair {
    /// Both networks map the m-bit scheme vector to an embedding; the target's
    /// parameters never change after this call.
    pub fn new<R: Rng>(
        m: usize,
        config: &RndConfig,
        target_rng: &mut R,
        predictor_rng: &mut R,
    ) -> Result<Self> {
        let dims = [m, config.hidden_dim, config.embed_dim];
        let acts = [Activation::Relu, Activation::Identity];
        let target = Mlp::new(&dims, &acts, target_rng)?;
        let predictor = Mlp::new(&dims, &acts, predictor_rng)?;
        let optimizer = OptimizerState::adam(config.learning_rate, &predictor);
        Ok(RndPair {
            target,
            predictor,
            optimizer,
            normalize: config.normalize,
            running: RunningStd::default(),
        })
    }

    /// Predictor initialized as an exact copy of the target: every bonus is 0.
    /// A degenerate baseline for tests.
    pub fn with_copied_predictor<R: Rng>(m: usize, config: &RndConfig, rng: &mut R) -> Result<Self> {
        let dims = [m, config.hidden_dim, config.embed_dim];
        let acts = [Activation::Relu, Activation::Identity];
        let target = Mlp::new(&dims, &acts, rng)?;
        let predictor = target.clone();
        let optimizer = OptimizerState::adam(config.learning_rate, &predictor);
        Ok(RndPair {
            target,
            predictor,
            optimizer,
            normalize: config.normalize,
            running: RunningStd::default(),
        })
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn predictor(&self) -> &Mlp {
        &self.predictor
    }

    /// Rebuild from checkpointed networks.
    pub fn from_parts(target: Mlp, predictor: Mlp, config: &RndConfig) -> Result<Self> {
        if target.input_dim() != predictor.input_dim()
            || target.output_dim() != predictor.output_dim()
        {
            return Err(Error::Shape {
                context: "distillation pair widths",
                expected: target.output_dim(),
                actual: predictor.output_dim(),
            });
        }
        let optimizer = OptimizerState::adam(config.learning_rate, &predictor);
        Ok(RndPair {
            target,
            predictor,
            optimizer,
            normalize: config.normalize,
            running: RunningStd::default(),
        })
    }

    fn embed_error(&self, scheme: &ConnectionScheme) -> Result<(Vec<f64>, Vec<f64>)> {
        let input = scheme.as_f64();
        let target_out = self.target.forward(&input)?;
        let predictor_out = self.predictor.forward(&input)?;
        let diff = predictor_out.iter().zip(&target_out).map(|(p, t)| p - t).collect();
        Ok((input, diff))
    }

    /// Squared Euclidean distance between the two embeddings of `scheme`.
    pub fn bonus(&self, scheme: &ConnectionScheme) -> Result<f64> {
        let (_, diff) = self.embed_error(scheme)?;
        let raw: f64 = diff.iter().map(|d| d * d).sum();
        if self.normalize {
            Ok(raw / self.running.std())
        } else {
            Ok(raw)
        }
    }

    /// One descent step fitting the predictor to the target on `scheme`. The
    /// target is untouched.
    pub fn train(&mut self, scheme: &ConnectionScheme) -> Result<()> {
        let (input, diff) = self.embed_error(scheme)?;
        if self.normalize {
            let raw: f64 = diff.iter().map(|d| d * d).sum();
            self.running.push(raw);
        }
        // d/d_out of ||pred - target||^2 is 2 * (pred - target).
        let upstream: Vec<f64> = diff.iter().map(|d| 2.0 * d).collect();
        let (grads, _) = self.predictor.backward(&input, &upstream)?;
        self.optimizer.step(&mut self.predictor, &grads, Direction::Descend)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::sample_bernoulli;
    use crate::seed::{rng, Stream};
    use std::collections::HashSet;

    fn pair(seed: u64, m: usize) -> RndPair {
        RndPair::new(
            m,
            &RndConfig::default(),
            &mut rng(seed, Stream::RndTargetInit),
            &mut rng(seed, Stream::RndPredictorInit),
        )
        .unwrap()
    }

    #[test]
    fn copied_predictor_gives_zero_bonus() {
        let p = RndPair::with_copied_predictor(
            6,
            &RndConfig::default(),
            &mut rng(0, Stream::RndTargetInit),
        )
        .unwrap();
        let mut r = rng(1, Stream::SchemeSampling);
        for _ in 0..10 {
            let s = sample_bernoulli(&[6], 0.5, &mut r).unwrap();
            assert_eq!(p.bonus(&s).unwrap(), 0.0);
        }
    }

    #[test]
    fn bonus_is_nonnegative() {
        let p = pair(2, 8);
        let mut r = rng(3, Stream::SchemeSampling);
        for _ in 0..20 {
            let s = sample_bernoulli(&[8], 0.5, &mut r).unwrap();
            assert!(p.bonus(&s).unwrap() >= 0.0);
        }
    }

    #[test]
    fn training_drives_bonus_toward_zero() {
        let mut p = pair(4, 10);
        let s = ConnectionScheme::decode("1010011010").unwrap();
        let initial = p.bonus(&s).unwrap();
        assert!(initial > 0.0);
        for _ in 0..500 {
            p.train(&s).unwrap();
        }
        let after = p.bonus(&s).unwrap();
        assert!(after < 0.01 * initial, "bonus {after} vs initial {initial}");
    }

    #[test]
    fn zero_bonus_means_zero_gradient() {
        let mut p = RndPair::with_copied_predictor(
            5,
            &RndConfig::default(),
            &mut rng(5, Stream::RndTargetInit),
        )
        .unwrap();
        let s = ConnectionScheme::decode("10101").unwrap();
        let before = p.predictor.clone();
        p.train(&s).unwrap();
        assert_eq!(p.predictor, before);
    }

    #[test]
    fn single_step_does_not_increase_bonus() {
        let mut p = pair(6, 8);
        let mut r = rng(7, Stream::SchemeSampling);
        for _ in 0..20 {
            let s = sample_bernoulli(&[8], 0.5, &mut r).unwrap();
            let before = p.bonus(&s).unwrap();
            p.train(&s).unwrap();
            let after = p.bonus(&s).unwrap();
            assert!(after <= before + 1e-12, "bonus rose from {before} to {after}");
        }
    }

    #[test]
    fn predictor_gradient_matches_finite_differences() {
        let p = pair(8, 6);
        // Pick a scheme whose relu pre-activations sit clear of the kink;
        // central differences are invalid within a step of it.
        let s = (0..64u32)
            .map(|v| {
                let bits = (0..6).map(|i| (v >> i) & 1 == 1).collect();
                ConnectionScheme::new(bits, vec![6]).unwrap()
            })
            .find(|s| {
                crate::nn::tests::min_abs_relu_preactivation(p.predictor(), &s.as_f64()) > 1e-3
            })
            .expect("some scheme avoids the kink");
        let (input, diff) = p.embed_error(&s).unwrap();
        let upstream: Vec<f64> = diff.iter().map(|d| 2.0 * d).collect();
        let (analytic, _) = p.predictor.backward(&input, &upstream).unwrap();
        let target = p.target.clone();
        let numeric = crate::nn::tests::finite_difference(
            &p.predictor,
            |net| {
                let out = net.forward(&input).unwrap();
                let t = target.forward(&input).unwrap();
                out.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum()
            },
            1e-6,
        );
        let err = crate::nn::tests::max_relative_error(&analytic, &numeric);
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn target_parameters_are_immutable() {
        let mut p = pair(9, 8);
        let snapshot = p.target.clone();
        let mut r = rng(10, Stream::SchemeSampling);
        for _ in 0..200 {
            let s = sample_bernoulli(&[8], 0.5, &mut r).unwrap();
            p.train(&s).unwrap();
        }
        assert_eq!(p.target, snapshot);
    }

    /// Statistical novelty ordering: after fitting the predictor on a set of
    /// schemes, unseen schemes carry a larger mean bonus in >= 9/10 seeds.
    #[test]
    fn unseen_schemes_carry_larger_bonus() {
        let m = 12;
        let mut wins = 0;
        for seed in 0..10u64 {
            let mut p = pair(100 + seed, m);
            let mut r = rng(seed, Stream::SchemeSampling);
            let mut train_set = Vec::new();
            let mut seen = HashSet::new();
            while train_set.len() < 20 {
                let s = sample_bernoulli(&[m], 0.5, &mut r).unwrap();
                if seen.insert(s.encode()) {
                    train_set.push(s);
                }
            }
            for step in 0..400 {
                let s = &train_set[step % train_set.len()];
                p.train(s).unwrap();
            }
            let mean_seen: f64 = train_set.iter().map(|s| p.bonus(s).unwrap()).sum::<f64>()
                / train_set.len() as f64;
            let mut fresh = Vec::new();
            while fresh.len() < 50 {
                let s = sample_bernoulli(&[m], 0.5, &mut r).unwrap();
                if !seen.contains(&s.encode()) {
                    fresh.push(s);
                }
            }
            let mean_fresh: f64 =
                fresh.iter().map(|s| p.bonus(s).unwrap()).sum::<f64>() / fresh.len() as f64;
            if mean_fresh > mean_seen {
                wins += 1;
            }
        }
        assert!(wins >= 9, "novelty ordering held in only {wins}/10 seeds");
    }

    #[test]
    fn normalized_bonus_stays_finite_and_nonnegative() {
        let cfg = RndConfig {
            normalize: true,
            ..RndConfig::default()
        };
        let mut p = RndPair::new(
            6,
            &cfg,
            &mut rng(11, Stream::RndTargetInit),
            &mut rng(11, Stream::RndPredictorInit),
        )
        .unwrap();
        let mut r = rng(12, Stream::SchemeSampling);
        let s0 = sample_bernoulli(&[6], 0.5, &mut r).unwrap();
        for _ in 0..50 {
            let s = sample_bernoulli(&[6], 0.5, &mut r).unwrap();
            p.train(&s).unwrap();
        }
        let scaled = p.bonus(&s0).unwrap();
        assert!(scaled.is_finite() && scaled >= 0.0);
    }
}
