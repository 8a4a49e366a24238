//! The scheme-generating policy: a feed-forward network mapping a constant
//! zero vector to per-block connection probabilities, trained by score-function
//! policy gradient and by importance-weighted replay updates.

use crate::error::{Error, Result};
use crate::nn::{Activation, Direction, GradientBundle, Mlp, OptimizerState};
use crate::scheme::{
    clamp_prob, realized_probs, ConnectionScheme, SchemeProbability, PROB_CLAMP,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Controller architecture and update hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ControllerConfig {
    /// Width of the constant zero input vector.
    pub input_dim: usize,
    /// Hidden relu widths between the input and the sigmoid output.
    pub hidden_dims: Vec<usize>,
    /// Policy-gradient step size.
    pub learning_rate: f64,
    /// Optional ratio clip for the replay update; `None` reproduces the plain
    /// importance-weighted form.
    pub ppo_clip: Option<f64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            input_dim: 8,
            hidden_dims: vec![64],
            learning_rate: 0.01,
            ppo_clip: None,
        }
    }
}

/// One sampled scheme with the probabilities in force when it was drawn and
/// the reward it earned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub probs_old: SchemeProbability,
    pub scheme: ConnectionScheme,
    pub reward: f64,
    pub iteration: usize,
}

/// Fixed-capacity FIFO store of trajectory records, sampled uniformly with
/// replacement for replay updates.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    records: VecDeque<TrajectoryRecord>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            records: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Insert a record, evicting the oldest one at capacity.
    pub fn put(&mut self, record: TrajectoryRecord) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
    }

    /// Draw `k` records uniformly with replacement.
    pub fn sample<R: Rng>(&self, k: usize, rng: &mut R) -> Result<Vec<TrajectoryRecord>> {
        if self.records.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..k)
            .map(|_| self.records[rng.random_range(0..self.records.len())].clone())
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter()
    }

    /// Rebuild a buffer from checkpointed records (oldest first).
    pub fn from_records(capacity: usize, records: Vec<TrajectoryRecord>) -> Self {
        let mut buffer = ReplayBuffer::new(capacity);
        for r in records {
            buffer.put(r);
        }
        buffer
    }
}

/// Outcome of a replay update request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Applied,
    /// Nothing to do: the batch was empty.
    EmptyBatch,
}

/// The scheme-generating policy.
#[derive(Debug, Clone)]
pub struct Controller {
    net: Mlp,
    input: Vec<f64>,
    stage_sizes: Vec<usize>,
    optimizer: OptimizerState,
    ppo_clip: Option<f64>,
}

impl Controller {
    /// Build a controller for `stage_sizes`. Hidden layers are randomly
    /// initialized; the final layer starts at zero so that every connection
    /// probability begins at 0.5 (maximum entropy).
    pub fn new<R: Rng>(stage_sizes: &[usize], config: &ControllerConfig, rng: &mut R) -> Result<Self> {
        if stage_sizes.is_empty() || stage_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("stage sizes must be positive".into()));
        }
        if config.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        let m: usize = stage_sizes.iter().sum();
        let mut dims = vec![config.input_dim];
        dims.extend(&config.hidden_dims);
        dims.push(m);
        let mut activations = vec![Activation::Relu; config.hidden_dims.len()];
        activations.push(Activation::Sigmoid);
        let mut net = Mlp::new(&dims, &activations, rng)?;
        net.zero_final_layer();
        Ok(Controller {
            net,
            input: vec![0.0; config.input_dim],
            stage_sizes: stage_sizes.to_vec(),
            optimizer: OptimizerState::sgd(config.learning_rate),
            ppo_clip: config.ppo_clip,
        })
    }

    /// Rebuild from a checkpointed network.
    pub fn from_parts(
        net: Mlp,
        stage_sizes: Vec<usize>,
        learning_rate: f64,
        ppo_clip: Option<f64>,
    ) -> Result<Self> {
        let m: usize = stage_sizes.iter().sum();
        if net.output_dim() != m {
            return Err(Error::Shape {
                context: "controller output width",
                expected: m,
                actual: net.output_dim(),
            });
        }
        let input = vec![0.0; net.input_dim()];
        Ok(Controller {
            net,
            input,
            stage_sizes,
            optimizer: OptimizerState::sgd(learning_rate),
            ppo_clip,
        })
    }

    pub fn m(&self) -> usize {
        self.stage_sizes.iter().sum()
    }

    pub fn stage_sizes(&self) -> &[usize] {
        &self.stage_sizes
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn learning_rate(&self) -> f64 {
        self.optimizer.learning_rate()
    }

    /// Raw sigmoid outputs before clamping.
    pub fn raw_probs(&self) -> Vec<f64> {
        self.net.forward(&self.input).expect("input width fixed at construction")
    }

    /// Current connection probabilities, clamped away from {0, 1}.
    pub fn probs(&self) -> SchemeProbability {
        SchemeProbability::clamped(&self.raw_probs()).expect("sigmoid output is finite")
    }

    /// Sample one scheme from the current probabilities.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> ConnectionScheme {
        self.probs()
            .sample(&self.stage_sizes, rng)
            .expect("probability width fixed at construction")
    }

    /// Mean realized probability of `scheme` under the current policy; the
    /// controller is near-deterministic when this approaches 1.
    pub fn convergence_pbar(&self, scheme: &ConnectionScheme) -> Result<f64> {
        let realized = realized_probs(&self.probs(), scheme)?;
        Ok(realized.iter().sum::<f64>() / realized.len() as f64)
    }

    /// Materialize the policy's preferred scheme: connect block `i` iff its
    /// probability exceeds 0.5. Exact ties resolve to disconnected, so an
    /// untrained policy extracts the all-zero scheme.
    pub fn extract_scheme(&self) -> ConnectionScheme {
        let bits = self.raw_probs().iter().map(|&p| p > 0.5).collect();
        ConnectionScheme::new(bits, self.stage_sizes.clone()).expect("widths match")
    }

    /// Gradient of `scale_i * log p_hat_i` summed over bits, with the scales
    /// treated as constants. Bits whose raw probability sits in the clamped
    /// region contribute nothing: the objective is flat there.
    fn surrogate_gradient(
        &self,
        scheme: &ConnectionScheme,
        per_bit_scale: &[f64],
    ) -> Result<GradientBundle> {
        if scheme.m() != self.m() {
            return Err(Error::Shape {
                context: "controller update scheme",
                expected: self.m(),
                actual: scheme.m(),
            });
        }
        let raw = self.raw_probs();
        let mut upstream = vec![0.0; raw.len()];
        for (i, &p) in raw.iter().enumerate() {
            if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                continue;
            }
            let (sign, p_hat) = if scheme.bit(i) { (1.0, p) } else { (-1.0, 1.0 - p) };
            upstream[i] = per_bit_scale[i] * sign / p_hat;
        }
        let (grads, _) = self.net.backward(&self.input, &upstream)?;
        Ok(grads)
    }

    /// Ascent direction of `reward * sum_i log p_hat_i`.
    pub fn reinforce_direction(&self, scheme: &ConnectionScheme, reward: f64) -> Result<GradientBundle> {
        if !reward.is_finite() {
            return Err(Error::NonFinite {
                context: "policy gradient reward",
            });
        }
        self.surrogate_gradient(scheme, &vec![reward; self.m()])
    }

    /// One policy-gradient ascent step on `reward * sum_i log p_hat_i`.
    pub fn reinforce_update(&mut self, scheme: &ConnectionScheme, reward: f64) -> Result<()> {
        let grads = self.reinforce_direction(scheme, reward)?;
        self.optimizer.step(&mut self.net, &grads, Direction::Ascend)
    }

    /// Batch-mean replay ascent direction: each record contributes
    /// `reward * sum_i (p_hat_i / p_hat_old_i) * grad log p_hat_i`, where the
    /// old probabilities come from the record. With the current policy equal
    /// to the sampling policy all ratios are 1 and this reduces to the mean
    /// policy-gradient direction.
    pub fn ppo_direction(&self, batch: &[TrajectoryRecord]) -> Result<GradientBundle> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let raw = self.raw_probs();
        let mut total = GradientBundle::zeros_like(&self.net);
        for record in batch {
            if record.probs_old.len() != self.m() {
                return Err(Error::Shape {
                    context: "replay record probability width",
                    expected: self.m(),
                    actual: record.probs_old.len(),
                });
            }
            if !record.reward.is_finite() {
                return Err(Error::NonFinite {
                    context: "replay record reward",
                });
            }
            let p_hat_old = realized_probs(&record.probs_old, &record.scheme)?;
            let mut scale = Vec::with_capacity(self.m());
            for i in 0..self.m() {
                let p = clamp_prob(raw[i]);
                let p_hat = if record.scheme.bit(i) { p } else { 1.0 - p };
                let mut ratio = p_hat / clamp_prob(p_hat_old[i]);
                if let Some(clip) = self.ppo_clip {
                    ratio = ratio.clamp(1.0 - clip, 1.0 + clip);
                }
                scale.push(record.reward * ratio);
            }
            let grads = self.surrogate_gradient(&record.scheme, &scale)?;
            total.add_scaled(&grads, 1.0 / batch.len() as f64);
        }
        Ok(total)
    }

    /// One ascent step along [`Controller::ppo_direction`]. An empty batch is
    /// a no-op reported as [`UpdateOutcome::EmptyBatch`].
    pub fn ppo_update(&mut self, batch: &[TrajectoryRecord]) -> Result<UpdateOutcome> {
        if batch.is_empty() {
            return Ok(UpdateOutcome::EmptyBatch);
        }
        let grads = self.ppo_direction(batch)?;
        self.optimizer.step(&mut self.net, &grads, Direction::Ascend)?;
        Ok(UpdateOutcome::Applied)
    }
}
