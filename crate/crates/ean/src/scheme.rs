//! Connection schemes: the length-`m` bit vector that says which blocks are
//! wired to the shared attention module, its text codec, Bernoulli sampling,
//! realized probabilities, log-probability, and the sparsity reward.

use crate::error::{Error, Result};
use rand::Rng;

/// Probabilities entering a logarithm are clamped to
/// `[PROB_CLAMP, 1 - PROB_CLAMP]`; the log-likelihood is undefined at 0 and 1.
pub const PROB_CLAMP: f64 = 1e-6;

/// Clamp a probability away from the saturated endpoints.
#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// A length-`m` bit vector with stage boundaries. Bit `i` is true when block
/// `i` (index 0 = shallowest) connects to the shared attention module.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConnectionScheme {
    bits: Vec<bool>,
    stage_sizes: Vec<usize>,
}

impl ConnectionScheme {
    pub fn new(bits: Vec<bool>, stage_sizes: Vec<usize>) -> Result<Self> {
        if stage_sizes.is_empty() || stage_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("stage sizes must be positive".into()));
        }
        let m: usize = stage_sizes.iter().sum();
        if bits.len() != m {
            return Err(Error::Shape {
                context: "scheme bits vs stage sizes",
                expected: m,
                actual: bits.len(),
            });
        }
        Ok(ConnectionScheme { bits, stage_sizes })
    }

    /// All-zero scheme (no attention connections).
    pub fn zeros(stage_sizes: &[usize]) -> Self {
        let m = stage_sizes.iter().sum();
        ConnectionScheme {
            bits: vec![false; m],
            stage_sizes: stage_sizes.to_vec(),
        }
    }

    /// All-one scheme (every block connected).
    pub fn ones(stage_sizes: &[usize]) -> Self {
        let m = stage_sizes.iter().sum();
        ConnectionScheme {
            bits: vec![true; m],
            stage_sizes: stage_sizes.to_vec(),
        }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn stage_sizes(&self) -> &[usize] {
        &self.stage_sizes
    }

    /// Number of connected blocks.
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Bits as a 0/1 real vector, the input representation for networks.
    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// True when `self` connects a subset of the blocks `other` connects.
    pub fn is_subset_of(&self, other: &ConnectionScheme) -> bool {
        self.m() == other.m() && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    /// Per-stage strings of '0'/'1', joined by '/'. The leftmost character of
    /// each stage is that stage's lowest-indexed block.
    pub fn encode(&self) -> String {
        let mut out = String::with_capacity(self.m() + self.stage_sizes.len());
        let mut offset = 0;
        for (k, &size) in self.stage_sizes.iter().enumerate() {
            if k > 0 {
                out.push('/');
            }
            for &b in &self.bits[offset..offset + size] {
                out.push(if b { '1' } else { '0' });
            }
            offset += size;
        }
        out
    }

    /// Inverse of [`ConnectionScheme::encode`]. Rejects anything outside the
    /// `{'0','1','/'}` alphabet and empty stages, reporting the byte offset.
    pub fn decode(text: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(text.len());
        let mut stage_sizes = Vec::new();
        let mut current = 0usize;
        for (pos, ch) in text.char_indices() {
            match ch {
                '0' => {
                    bits.push(false);
                    current += 1;
                }
                '1' => {
                    bits.push(true);
                    current += 1;
                }
                '/' => {
                    if current == 0 {
                        return Err(Error::Parse {
                            position: pos,
                            message: "empty stage".into(),
                        });
                    }
                    stage_sizes.push(current);
                    current = 0;
                }
                other => {
                    return Err(Error::Parse {
                        position: pos,
                        message: format!("illegal character {other:?}"),
                    });
                }
            }
        }
        if current == 0 {
            return Err(Error::Parse {
                position: text.len(),
                message: "empty stage".into(),
            });
        }
        stage_sizes.push(current);
        Ok(ConnectionScheme { bits, stage_sizes })
    }
}

impl std::fmt::Display for ConnectionScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.encode())
    }
}

/// Schemes serialize as their text encoding, e.g. `"110/101"`.
impl serde::Serialize for ConnectionScheme {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.encode())
    }
}

impl<'de> serde::Deserialize<'de> for ConnectionScheme {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        ConnectionScheme::decode(&text).map_err(serde::de::Error::custom)
    }
}

impl serde::Serialize for SchemeProbability {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.probs.serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for SchemeProbability {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(deserializer)?;
        SchemeProbability::new(probs).map_err(serde::de::Error::custom)
    }
}

/// Per-block connection probabilities, strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeProbability {
    probs: Vec<f64>,
}

impl SchemeProbability {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p <= 0.0 || *p >= 1.0) {
            return Err(Error::InvalidConfig(
                "scheme probabilities must lie strictly inside (0, 1)".into(),
            ));
        }
        Ok(SchemeProbability { probs })
    }

    /// Build from raw values, clamping into `[PROB_CLAMP, 1 - PROB_CLAMP]`.
    pub fn clamped(raw: &[f64]) -> Result<Self> {
        if raw.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                context: "scheme probabilities",
            });
        }
        Ok(SchemeProbability {
            probs: raw.iter().map(|&p| clamp_prob(p)).collect(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    fn check_len(&self, scheme: &ConnectionScheme, context: &'static str) -> Result<()> {
        if self.probs.len() != scheme.m() {
            return Err(Error::Shape {
                context,
                expected: scheme.m(),
                actual: self.probs.len(),
            });
        }
        Ok(())
    }

    /// Sample bit `i ~ Bernoulli(p_i)`, independently across blocks.
    pub fn sample<R: Rng>(&self, stage_sizes: &[usize], rng: &mut R) -> Result<ConnectionScheme> {
        let bits = self.probs.iter().map(|&p| rng.random_bool(p)).collect();
        ConnectionScheme::new(bits, stage_sizes.to_vec())
    }
}

/// Draw `m` i.i.d. Bernoulli(`p`) bits.
pub fn sample_bernoulli<R: Rng>(stage_sizes: &[usize], p: f64, rng: &mut R) -> Result<ConnectionScheme> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("bernoulli p={p} outside [0, 1]")));
    }
    let m = stage_sizes.iter().sum();
    let bits = (0..m).map(|_| rng.random_bool(p)).collect();
    ConnectionScheme::new(bits, stage_sizes.to_vec())
}

/// Probability the sampler assigned to each realized bit:
/// `p_hat_i = a_i * p_i + (1 - a_i) * (1 - p_i)`.
pub fn realized_probs(probs: &SchemeProbability, scheme: &ConnectionScheme) -> Result<Vec<f64>> {
    probs.check_len(scheme, "realized probabilities")?;
    Ok(probs
        .probs
        .iter()
        .zip(scheme.bits())
        .map(|(&p, &a)| if a { p } else { 1.0 - p })
        .collect())
}

/// Log-likelihood of the scheme: the sum of `ln p_hat_i`, with each factor
/// clamped away from {0, 1} so the result is finite.
pub fn log_prob(probs: &SchemeProbability, scheme: &ConnectionScheme) -> Result<f64> {
    probs.check_len(scheme, "scheme log probability")?;
    Ok(realized_probs(probs, scheme)?
        .into_iter()
        .map(|p| clamp_prob(p).ln())
        .sum())
}

/// Sparsity reward: `1 - popcount / m`, in [0, 1]. All-zero schemes score 1.
pub fn sparsity_reward(scheme: &ConnectionScheme) -> f64 {
    1.0 - scheme.popcount() as f64 / scheme.m() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{rng, Stream};
    use proptest::prelude::*;

    #[test]
    fn encode_single_stage() {
        let s = ConnectionScheme::new(vec![true, true, false], vec![3]).unwrap();
        assert_eq!(s.encode(), "110");
    }

    #[test]
    fn encode_two_stages_all_ones() {
        let s = ConnectionScheme::ones(&[2, 2]);
        assert_eq!(s.encode(), "11/11");
    }

    #[test]
    fn encode_known_stage_string() {
        // 18-block stage with 9 connections.
        let text = "001100100101110101";
        let s = ConnectionScheme::decode(text).unwrap();
        assert_eq!(s.m(), 18);
        assert_eq!(s.popcount(), 9);
        assert_eq!(s.encode(), text);
    }

    #[test]
    fn decode_simple() {
        let s = ConnectionScheme::decode("110").unwrap();
        assert_eq!(s.bits(), &[true, true, false]);
        assert_eq!(s.stage_sizes(), &[3]);
    }

    #[test]
    fn decode_rejects_illegal_character() {
        let err = ConnectionScheme::decode("1A0").unwrap_err();
        match err {
            Error::Parse { position, .. } => assert_eq!(position, 1),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn decode_rejects_empty_stage() {
        assert!(ConnectionScheme::decode("11//10").is_err());
        assert!(ConnectionScheme::decode("/10").is_err());
        assert!(ConnectionScheme::decode("10/").is_err());
        assert!(ConnectionScheme::decode("").is_err());
    }

    #[test]
    fn bernoulli_endpoints() {
        let mut r = rng(0, Stream::SchemeSampling);
        let zeros = sample_bernoulli(&[5, 5], 0.0, &mut r).unwrap();
        assert_eq!(zeros.popcount(), 0);
        let ones = sample_bernoulli(&[5, 5], 1.0, &mut r).unwrap();
        assert_eq!(ones.popcount(), 10);
    }

    #[test]
    fn bernoulli_half_mean_popcount() {
        let mut r = rng(1, Stream::SchemeSampling);
        let draws = 10_000;
        let total: usize = (0..draws)
            .map(|_| sample_bernoulli(&[18], 0.5, &mut r).unwrap().popcount())
            .sum();
        let mean = total as f64 / draws as f64;
        // Binomial(18, 0.5) mean 9, sd of the sample mean ~ 0.021.
        assert!((8.7..=9.3).contains(&mean), "mean popcount {mean}");
    }

    #[test]
    fn sample_from_probs_is_seed_deterministic() {
        let probs = SchemeProbability::new(vec![0.3, 0.7, 0.5, 0.9]).unwrap();
        let a = probs
            .sample(&[4], &mut rng(7, Stream::SchemeSampling))
            .unwrap();
        let b = probs
            .sample(&[4], &mut rng(7, Stream::SchemeSampling))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_from_probs_bit_means_converge() {
        let probs = SchemeProbability::new(vec![0.5; 6]).unwrap();
        let mut r = rng(3, Stream::SchemeSampling);
        let draws = 10_000;
        let mut counts = [0usize; 6];
        for _ in 0..draws {
            let s = probs.sample(&[6], &mut r).unwrap();
            for (c, &b) in counts.iter_mut().zip(s.bits()) {
                if b {
                    *c += 1;
                }
            }
        }
        let sigma = (0.25f64 / draws as f64).sqrt();
        for c in counts {
            let mean = c as f64 / draws as f64;
            assert!((mean - 0.5).abs() < 3.0 * sigma, "bit mean {mean}");
        }
    }

    #[test]
    fn sample_near_one_returns_ones() {
        // Probabilities at the clamp ceiling: all-ones is overwhelmingly likely.
        let probs = SchemeProbability::new(vec![1.0 - PROB_CLAMP; 8]).unwrap();
        let s = probs.sample(&[8], &mut rng(5, Stream::SchemeSampling)).unwrap();
        assert_eq!(s.popcount(), 8);
    }

    #[test]
    fn realized_prob_formula() {
        let probs = SchemeProbability::new(vec![0.7]).unwrap();
        let on = ConnectionScheme::new(vec![true], vec![1]).unwrap();
        let off = ConnectionScheme::new(vec![false], vec![1]).unwrap();
        assert_eq!(realized_probs(&probs, &on).unwrap(), vec![0.7]);
        assert!((realized_probs(&probs, &off).unwrap()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn realized_probs_half_is_scheme_independent() {
        let probs = SchemeProbability::new(vec![0.5; 6]).unwrap();
        let mut r = rng(2, Stream::SchemeSampling);
        let s = sample_bernoulli(&[6], 0.5, &mut r).unwrap();
        assert_eq!(realized_probs(&probs, &s).unwrap(), vec![0.5; 6]);
    }

    #[test]
    fn log_prob_examples() {
        let p1 = SchemeProbability::new(vec![0.7]).unwrap();
        let s1 = ConnectionScheme::new(vec![true], vec![1]).unwrap();
        assert!((log_prob(&p1, &s1).unwrap() - 0.7f64.ln()).abs() < 1e-15);

        let p2 = SchemeProbability::new(vec![0.7, 0.2]).unwrap();
        let s2 = ConnectionScheme::new(vec![false, true], vec![2]).unwrap();
        assert!((log_prob(&p2, &s2).unwrap() - (0.3f64.ln() + 0.2f64.ln())).abs() < 1e-12);

        let p3 = SchemeProbability::new(vec![0.5; 18]).unwrap();
        let s3 = ConnectionScheme::zeros(&[18]);
        assert!((log_prob(&p3, &s3).unwrap() - 18.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_prob_rejects_length_mismatch() {
        let p = SchemeProbability::new(vec![0.5; 3]).unwrap();
        let s = ConnectionScheme::zeros(&[4]);
        assert!(matches!(log_prob(&p, &s), Err(Error::Shape { .. })));
    }

    #[test]
    fn sparsity_reward_extremes() {
        assert_eq!(sparsity_reward(&ConnectionScheme::ones(&[6, 6])), 0.0);
        assert_eq!(sparsity_reward(&ConnectionScheme::zeros(&[6, 6])), 1.0);
    }

    #[test]
    fn sparsity_reward_known_stage_string() {
        let s = ConnectionScheme::decode("001100100101110101").unwrap();
        assert_eq!(sparsity_reward(&s), 0.5);
    }

    prop_compose! {
        fn arb_scheme()(stage_sizes in prop::collection::vec(1usize..6, 1..4))
            (bits in prop::collection::vec(any::<bool>(), stage_sizes.iter().sum::<usize>()),
             stage_sizes in Just(stage_sizes))
            -> ConnectionScheme
        {
            ConnectionScheme::new(bits, stage_sizes).unwrap()
        }
    }

    proptest! {
        #[test]
        fn codec_round_trips(s in arb_scheme()) {
            prop_assert_eq!(ConnectionScheme::decode(&s.encode()).unwrap(), s);
        }

        #[test]
        fn sparsity_plus_density_is_one(s in arb_scheme()) {
            let density = s.popcount() as f64 / s.m() as f64;
            prop_assert_eq!(sparsity_reward(&s) + density, 1.0);
        }

        #[test]
        fn realized_probs_flip_symmetry(
            s in arb_scheme(),
            raw in prop::collection::vec(0.01f64..0.99, 32),
        ) {
            let probs: Vec<f64> = raw.iter().cycle().take(s.m()).copied().collect();
            let flipped_probs: Vec<f64> = probs.iter().map(|p| 1.0 - p).collect();
            let flipped_bits: Vec<bool> = s.bits().iter().map(|b| !b).collect();
            let flipped =
                ConnectionScheme::new(flipped_bits, s.stage_sizes().to_vec()).unwrap();
            let a = realized_probs(&SchemeProbability::new(probs).unwrap(), &s).unwrap();
            let b = realized_probs(&SchemeProbability::new(flipped_probs).unwrap(), &flipped)
                .unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }

        #[test]
        fn log_prob_matches_product_of_realized(
            s in arb_scheme(),
            raw in prop::collection::vec(0.01f64..0.99, 32),
        ) {
            let probs =
                SchemeProbability::new(raw.iter().cycle().take(s.m()).copied().collect())
                    .unwrap();
            let lp = log_prob(&probs, &s).unwrap();
            let product: f64 = realized_probs(&probs, &s).unwrap().iter().product();
            prop_assert!((lp - product.ln()).abs() < 1e-12);
        }
    }
}
