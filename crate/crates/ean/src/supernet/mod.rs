//! A desk-scale residual vector network whose blocks can be gated onto a
//! shared sigmoid attention module, block by block, via a connection scheme.
//!
//! Block `l` in stage `k` computes
//! `x_{l+1} = x_l + (a_l * M(f_l(x_l); W) + (1 - a_l) * 1) ⊙ f_l(x_l)`,
//! where `f_l` is a two-layer relu residual mapping and `M` is a bottleneck
//! network with a sigmoid output mask. Disconnected blocks skip the multiply
//! entirely, so the all-zero scheme is bitwise the plain residual network.
//! In `ShareFull` mode all blocks of a stage share one module's storage; in
//! `OrgFull` mode every block owns its module.

mod dataset;
mod timing;

pub use dataset::{DatasetConfig, Split, ToyDataset};
pub use timing::{relative_increment_pct, time_increment, BenchResult};

use crate::env::Evaluator;
use crate::error::{Error, Result};
use crate::nn::{
    read_mlp, write_mlp, Activation, Direction, GradientBundle, Mlp, OptimizerState, Trace,
};
use crate::scheme::{sample_bernoulli, ConnectionScheme};
use crate::seed::{rng, Stream};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Whether attention modules are owned per block or shared per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingMode {
    OrgFull,
    ShareFull,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SupernetConfig {
    /// Blocks per stage; the total is `m`.
    pub stage_sizes: Vec<usize>,
    /// Feature width of each stage.
    pub stage_widths: Vec<usize>,
    /// Hidden width of every residual mapping.
    pub block_hidden: usize,
    /// Hidden width of every attention module.
    pub attention_bottleneck: usize,
    pub sharing_mode: SharingMode,
    pub class_count: usize,
    pub dataset_seed: u64,
    /// Minibatch size for every training loop.
    pub batch_size: usize,
    /// SGD step size for supernet and stand-alone training.
    pub learning_rate: f64,
    /// Budget for training a sub-network from scratch.
    pub scratch_steps: usize,
}

impl Default for SupernetConfig {
    fn default() -> Self {
        SupernetConfig {
            stage_sizes: vec![6, 6, 6],
            stage_widths: vec![16, 32, 64],
            block_hidden: 16,
            attention_bottleneck: 8,
            sharing_mode: SharingMode::ShareFull,
            class_count: 8,
            dataset_seed: 0,
            batch_size: 64,
            learning_rate: 0.1,
            scratch_steps: 300,
        }
    }
}

impl SupernetConfig {
    pub fn m(&self) -> usize {
        self.stage_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_sizes.is_empty() || self.stage_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("stage sizes must be positive".into()));
        }
        if self.stage_widths.len() != self.stage_sizes.len() {
            return Err(Error::InvalidConfig(
                "stage widths and stage sizes must have the same length".into(),
            ));
        }
        if self.stage_widths.iter().any(|&w| w == 0)
            || self.block_hidden == 0
            || self.attention_bottleneck == 0
        {
            return Err(Error::InvalidConfig("widths must be positive".into()));
        }
        if self.class_count < 2 {
            return Err(Error::InvalidConfig("need at least two classes".into()));
        }
        if self.batch_size == 0 || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("bad training hyperparameters".into()));
        }
        Ok(())
    }

    /// Matching dataset configuration: inputs live at the first stage's width.
    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            input_dim: self.stage_widths[0],
            class_count: self.class_count,
            seed: self.dataset_seed,
            ..DatasetConfig::default()
        }
    }
}

/// Gradients for every parameter group of a [`Supernet`].
pub struct SupernetGrads {
    blocks: Vec<GradientBundle>,
    attention: Vec<GradientBundle>,
    projections: Vec<GradientBundle>,
    head: GradientBundle,
}

/// Forward intermediates for one sample, enough to backpropagate.
pub struct SupernetTrace {
    /// `x_l` entering each block.
    block_inputs: Vec<Vec<f64>>,
    f_traces: Vec<Trace>,
    mask_traces: Vec<Option<Trace>>,
    proj_traces: Vec<Trace>,
    head_trace: Trace,
}

impl SupernetTrace {
    pub fn block_inputs(&self) -> &[Vec<f64>] {
        &self.block_inputs
    }

    pub fn scores(&self) -> &[f64] {
        self.head_trace.output()
    }
}

pub struct Supernet {
    config: SupernetConfig,
    /// Residual mappings, one per block.
    blocks: Vec<Mlp>,
    /// Attention modules; one per stage in `ShareFull`, one per block in `OrgFull`.
    attention: Vec<Mlp>,
    /// Block index -> index into `attention`. Shared storage is shared here.
    attn_index: Vec<usize>,
    /// Width adapters between consecutive stages.
    projections: Vec<Mlp>,
    /// Classifier producing raw class scores.
    head: Mlp,
    /// Stage of each block.
    stage_of: Vec<usize>,
}

impl Supernet {
    pub fn new<R: Rng>(config: &SupernetConfig, init_rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut blocks = Vec::new();
        let mut stage_of = Vec::new();
        for (k, &size) in config.stage_sizes.iter().enumerate() {
            let w = config.stage_widths[k];
            for _ in 0..size {
                blocks.push(Mlp::new(
                    &[w, config.block_hidden, w],
                    &[Activation::Relu, Activation::Identity],
                    init_rng,
                )?);
                stage_of.push(k);
            }
        }
        let attention_module = |w: usize, r: &mut R| {
            Mlp::new(
                &[w, config.attention_bottleneck, w],
                &[Activation::Relu, Activation::Sigmoid],
                r,
            )
        };
        let mut attention = Vec::new();
        let mut attn_index = Vec::new();
        match config.sharing_mode {
            SharingMode::ShareFull => {
                for &w in &config.stage_widths {
                    attention.push(attention_module(w, init_rng)?);
                }
                attn_index.extend(stage_of.iter().copied());
            }
            SharingMode::OrgFull => {
                for (l, &k) in stage_of.iter().enumerate() {
                    attention.push(attention_module(config.stage_widths[k], init_rng)?);
                    attn_index.push(l);
                }
            }
        }
        let mut projections = Vec::new();
        for k in 1..config.stage_widths.len() {
            projections.push(Mlp::new(
                &[config.stage_widths[k - 1], config.stage_widths[k]],
                &[Activation::Identity],
                init_rng,
            )?);
        }
        let head = Mlp::new(
            &[*config.stage_widths.last().expect("nonempty"), config.class_count],
            &[Activation::Identity],
            init_rng,
        )?;
        Ok(Supernet {
            config: config.clone(),
            blocks,
            attention,
            attn_index,
            projections,
            head,
            stage_of,
        })
    }

    pub fn config(&self) -> &SupernetConfig {
        &self.config
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn attention_modules(&self) -> &[Mlp] {
        &self.attention
    }

    pub fn attention_parameter_count(&self) -> usize {
        self.attention.iter().map(Mlp::parameter_count).sum()
    }

    fn check_scheme(&self, scheme: &ConnectionScheme) -> Result<()> {
        if scheme.m() != self.m() {
            return Err(Error::Shape {
                context: "supernet scheme",
                expected: self.m(),
                actual: scheme.m(),
            });
        }
        Ok(())
    }

    /// Class scores for one input under `scheme`.
    pub fn forward_sample(&self, scheme: &ConnectionScheme, input: &[f64]) -> Result<Vec<f64>> {
        self.check_scheme(scheme)?;
        let mut x = input.to_vec();
        for l in 0..self.blocks.len() {
            if l > 0 && self.stage_of[l] != self.stage_of[l - 1] {
                x = self.projections[self.stage_of[l] - 1].forward(&x)?;
            }
            let f = self.blocks[l].forward(&x)?;
            if scheme.bit(l) {
                let mask = self.attention[self.attn_index[l]].forward(&f)?;
                for ((xi, mi), fi) in x.iter_mut().zip(&mask).zip(&f) {
                    *xi += mi * fi;
                }
            } else {
                for (xi, fi) in x.iter_mut().zip(&f) {
                    *xi += fi;
                }
            }
        }
        self.head.forward(&x)
    }

    /// Forward pass retaining all intermediates.
    pub fn forward_trace(&self, scheme: &ConnectionScheme, input: &[f64]) -> Result<SupernetTrace> {
        self.check_scheme(scheme)?;
        let mut x = input.to_vec();
        let mut block_inputs = Vec::with_capacity(self.blocks.len());
        let mut f_traces = Vec::with_capacity(self.blocks.len());
        let mut mask_traces = Vec::with_capacity(self.blocks.len());
        let mut proj_traces = Vec::with_capacity(self.projections.len());
        for l in 0..self.blocks.len() {
            if l > 0 && self.stage_of[l] != self.stage_of[l - 1] {
                let t = self.projections[self.stage_of[l] - 1].forward_trace(&x)?;
                x = t.output().to_vec();
                proj_traces.push(t);
            }
            block_inputs.push(x.clone());
            let f_trace = self.blocks[l].forward_trace(&x)?;
            let f = f_trace.output();
            if scheme.bit(l) {
                let mask_trace = self.attention[self.attn_index[l]].forward_trace(f)?;
                let mask = mask_trace.output();
                for ((xi, mi), fi) in x.iter_mut().zip(mask).zip(f) {
                    *xi += mi * fi;
                }
                mask_traces.push(Some(mask_trace));
            } else {
                for (xi, fi) in x.iter_mut().zip(f) {
                    *xi += fi;
                }
                mask_traces.push(None);
            }
            f_traces.push(f_trace);
        }
        let head_trace = self.head.forward_trace(&x)?;
        Ok(SupernetTrace {
            block_inputs,
            f_traces,
            mask_traces,
            proj_traces,
            head_trace,
        })
    }

    fn zero_grads(&self) -> SupernetGrads {
        SupernetGrads {
            blocks: self.blocks.iter().map(GradientBundle::zeros_like).collect(),
            attention: self.attention.iter().map(GradientBundle::zeros_like).collect(),
            projections: self.projections.iter().map(GradientBundle::zeros_like).collect(),
            head: GradientBundle::zeros_like(&self.head),
        }
    }

    /// Backpropagate `d_scores` for one traced sample, accumulating scaled
    /// parameter gradients into `grads`. Shared attention storage receives
    /// contributions from every connected block of its stage.
    fn accumulate_backward(
        &self,
        trace: &SupernetTrace,
        d_scores: &[f64],
        factor: f64,
        grads: &mut SupernetGrads,
    ) -> Result<()> {
        let (head_grads, mut dx) = self.head.backward_from_trace(&trace.head_trace, d_scores)?;
        grads.head.add_scaled(&head_grads, factor);
        let mut proj_iter = trace.proj_traces.len();
        for l in (0..self.blocks.len()).rev() {
            let f_trace = &trace.f_traces[l];
            let f = f_trace.output();
            let df: Vec<f64> = if let Some(mask_trace) = &trace.mask_traces[l] {
                let mask = mask_trace.output();
                // x_out = x + mask ⊙ f: split the upstream between both factors.
                let d_mask: Vec<f64> = dx.iter().zip(f).map(|(g, fi)| g * fi).collect();
                let (attn_grads, df_via_mask) = self.attention[self.attn_index[l]]
                    .backward_from_trace(mask_trace, &d_mask)?;
                grads.attention[self.attn_index[l]].add_scaled(&attn_grads, factor);
                dx.iter()
                    .zip(mask)
                    .zip(df_via_mask)
                    .map(|((g, mi), dm)| g * mi + dm)
                    .collect()
            } else {
                dx.clone()
            };
            let (block_grads, dx_via_f) = self.blocks[l].backward_from_trace(f_trace, &df)?;
            grads.blocks[l].add_scaled(&block_grads, factor);
            for (g, d) in dx.iter_mut().zip(dx_via_f) {
                *g += d;
            }
            if l > 0 && self.stage_of[l] != self.stage_of[l - 1] {
                proj_iter -= 1;
                let (proj_grads, dprev) = self.projections[self.stage_of[l] - 1]
                    .backward_from_trace(&trace.proj_traces[proj_iter], &dx)?;
                grads.projections[self.stage_of[l] - 1].add_scaled(&proj_grads, factor);
                dx = dprev;
            }
        }
        Ok(())
    }

    /// One SGD descent step on the mean cross-entropy of the batch under
    /// `scheme`. Returns the pre-step mean loss.
    pub fn train_step(
        &mut self,
        scheme: &ConnectionScheme,
        inputs: &[&[f64]],
        labels: &[usize],
    ) -> Result<f64> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::InvalidConfig("empty or mismatched training batch".into()));
        }
        let mut grads = self.zero_grads();
        let factor = 1.0 / inputs.len() as f64;
        let mut total_loss = 0.0;
        for (&input, &label) in inputs.iter().zip(labels) {
            let trace = self.forward_trace(scheme, input)?;
            let (loss, d_scores) = softmax_cross_entropy(trace.scores(), label)?;
            total_loss += loss;
            self.accumulate_backward(&trace, &d_scores, factor, &mut grads)?;
        }
        self.apply_sgd(&grads)?;
        Ok(total_loss * factor)
    }

    fn apply_sgd(&mut self, grads: &SupernetGrads) -> Result<()> {
        let lr = self.config.learning_rate;
        for (part, g) in self.blocks.iter_mut().zip(&grads.blocks) {
            OptimizerState::sgd(lr).step(part, g, Direction::Descend)?;
        }
        for (part, g) in self.attention.iter_mut().zip(&grads.attention) {
            OptimizerState::sgd(lr).step(part, g, Direction::Descend)?;
        }
        for (part, g) in self.projections.iter_mut().zip(&grads.projections) {
            OptimizerState::sgd(lr).step(part, g, Direction::Descend)?;
        }
        OptimizerState::sgd(lr).step(&mut self.head, &grads.head, Direction::Descend)
    }

    /// Weight-sharing pretraining: each step draws a fresh Bernoulli(0.5)
    /// scheme and takes one minibatch step through it. Returns the per-step
    /// loss curve.
    pub fn pretrain<R: Rng>(&mut self, data: &ToyDataset, steps: usize, rng: &mut R) -> Result<Vec<f64>> {
        let mut losses = Vec::with_capacity(steps);
        for _ in 0..steps {
            let scheme = sample_bernoulli(&self.config.stage_sizes, 0.5, rng)?;
            let (inputs, labels) = draw_batch(data.train(), self.config.batch_size, rng);
            losses.push(self.train_step(&scheme, &inputs, &labels)?);
        }
        Ok(losses)
    }

    /// Validation accuracy of the sub-network selected by `scheme`. Pure:
    /// repeated evaluation returns the identical value.
    pub fn proxy_eval(&self, scheme: &ConnectionScheme, data: &ToyDataset) -> Result<f64> {
        accuracy(self, scheme, data.val())
    }
}

/// Mean loss `-log softmax(scores)[label]` and its score gradient.
fn softmax_cross_entropy(scores: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= scores.len() {
        return Err(Error::Shape {
            context: "class label",
            expected: scores.len(),
            actual: label,
        });
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = -(exps[label] / z).ln();
    let mut d_scores: Vec<f64> = exps.iter().map(|e| e / z).collect();
    d_scores[label] -= 1.0;
    Ok((loss, d_scores))
}

fn draw_batch<'a, R: Rng>(
    split: Split<'a>,
    batch_size: usize,
    rng: &mut R,
) -> (Vec<&'a [f64]>, Vec<usize>) {
    let mut inputs = Vec::with_capacity(batch_size);
    let mut labels = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let i = rng.random_range(0..split.len());
        inputs.push(split.inputs[i].as_slice());
        labels.push(split.labels[i]);
    }
    (inputs, labels)
}

fn accuracy(net: &Supernet, scheme: &ConnectionScheme, split: Split<'_>) -> Result<f64> {
    let mut correct = 0usize;
    for (input, &label) in split.inputs.iter().zip(split.labels) {
        let scores = net.forward_sample(scheme, input)?;
        let mut best = 0usize;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / split.len() as f64)
}

/// Train a fresh sub-network with `scheme` fixed for the configured budget and
/// return its test accuracy. Deterministic per `seed`.
pub fn scratch_train(
    config: &SupernetConfig,
    scheme: &ConnectionScheme,
    data: &ToyDataset,
    seed: u64,
) -> Result<f64> {
    let mut r = rng(seed, Stream::Scratch);
    let mut net = Supernet::new(config, &mut r)?;
    for _ in 0..config.scratch_steps {
        let (inputs, labels) = draw_batch(data.train(), config.batch_size, &mut r);
        net.train_step(scheme, &inputs, &labels)?;
    }
    accuracy(&net, scheme, data.test())
}

/// A pretrained supernet paired with its dataset, exposed as a deterministic
/// reward environment over validation accuracy.
pub struct SupernetEvaluator {
    net: Supernet,
    data: ToyDataset,
}

impl SupernetEvaluator {
    pub fn new(net: Supernet, data: ToyDataset) -> Self {
        SupernetEvaluator { net, data }
    }

    pub fn net(&self) -> &Supernet {
        &self.net
    }

    pub fn data(&self) -> &ToyDataset {
        &self.data
    }
}

impl Evaluator for SupernetEvaluator {
    fn m(&self) -> usize {
        self.net.m()
    }

    fn eval(&mut self, scheme: &ConnectionScheme) -> Result<f64> {
        self.net.proxy_eval(scheme, &self.data)
    }

    fn eval_both(&mut self, scheme: &ConnectionScheme) -> Result<(f64, f64)> {
        let v = self.eval(scheme)?;
        Ok((v, v))
    }
}

const SUPERNET_MAGIC: &[u8; 8] = b"EANSUP1\n";

/// Serialize config plus every parameter group, in construction order.
pub fn save_supernet(path: &Path, net: &Supernet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SUPERNET_MAGIC)?;
    let config_json = serde_json::to_vec(&net.config)?;
    w.write_all(&(config_json.len() as u32).to_le_bytes())?;
    w.write_all(&config_json)?;
    for part in net
        .blocks
        .iter()
        .chain(net.attention.iter())
        .chain(net.projections.iter())
        .chain(std::iter::once(&net.head))
    {
        write_mlp(&mut w, part)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_supernet(path: &Path) -> Result<Supernet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SUPERNET_MAGIC {
        return Err(Error::InvalidConfig("bad supernet checkpoint magic".into()));
    }
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let mut config_json = vec![0u8; u32::from_le_bytes(len_buf) as usize];
    r.read_exact(&mut config_json)?;
    let config: SupernetConfig = serde_json::from_slice(&config_json)?;
    // Rebuild the skeleton to learn the part layout, then overwrite weights.
    let mut skeleton = Supernet::new(&config, &mut rng(0, Stream::SupernetInit))?;
    for part in skeleton
        .blocks
        .iter_mut()
        .chain(skeleton.attention.iter_mut())
        .chain(skeleton.projections.iter_mut())
        .chain(std::iter::once(&mut skeleton.head))
    {
        *part = read_mlp(&mut r)?;
    }
    Ok(skeleton)
}
