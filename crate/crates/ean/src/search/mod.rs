//! The end-to-end search loop plus its oracles and baselines. Each iteration
//! samples a scheme from the controller, scores it (sparsity + environment +
//! novelty), takes one policy-gradient step, fits the novelty predictor,
//! stores the trajectory, and from a warmup iteration onward also takes one
//! importance-weighted replay step per iteration.

mod baseline;
mod bruteforce;
mod correlate;
mod stats;

pub use baseline::{baseline_hsp, baseline_random, RandomBaseline, ScoredScheme};
pub use bruteforce::{brute_force, BruteForce, RankedScheme, BRUTE_FORCE_LIMIT};
pub use correlate::{pearson, proxy_correlation, CorrelationReport};
pub use stats::{mean, sample_std, t_test_greater};

use crate::controller::{Controller, ControllerConfig, ReplayBuffer, TrajectoryRecord};
use crate::curiosity::{RndConfig, RndPair};
use crate::env::{combine_reward, Evaluator, RewardWeights};
use crate::error::{Error, Result};
use crate::nn::{read_mlp, write_mlp};
use crate::scheme::{realized_probs, sparsity_reward, ConnectionScheme};
use crate::seed::{rng, rng_step, Stream};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SearchConfig {
    pub stage_sizes: Vec<usize>,
    /// Supernet pretraining budget; echoed here so one config drives a run.
    pub pretrain_steps: usize,
    /// Number of search iterations.
    pub search_steps: usize,
    /// First iteration at which the replay update fires (and every one after).
    pub ppo_start: usize,
    pub weights: RewardWeights,
    pub replay_capacity: usize,
    pub replay_sample: usize,
    pub seed: u64,
    pub controller: ControllerConfig,
    pub rnd: RndConfig,
    /// Environment selector, echoed into artifacts: "planted", "supernet",
    /// or "external:<endpoint>".
    pub env: String,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            stage_sizes: vec![6, 6, 6],
            pretrain_steps: 2000,
            search_steps: 2000,
            ppo_start: 200,
            weights: RewardWeights::default(),
            replay_capacity: 64,
            replay_sample: 8,
            seed: 0,
            controller: ControllerConfig::default(),
            rnd: RndConfig::default(),
            env: "planted".into(),
        }
    }
}

impl SearchConfig {
    /// Shorter schedule for environments where each evaluation trains or
    /// forwards a network.
    pub fn supernet_default() -> Self {
        SearchConfig {
            search_steps: 300,
            ppo_start: 50,
            env: "supernet".into(),
            ..SearchConfig::default()
        }
    }

    pub fn m(&self) -> usize {
        self.stage_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_sizes.is_empty() || self.stage_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("stage sizes must be positive".into()));
        }
        if self.ppo_start == 0 {
            return Err(Error::InvalidConfig("ppo_start must be at least 1".into()));
        }
        if self.search_steps > 0 && self.ppo_start > self.search_steps {
            return Err(Error::InvalidConfig(
                "ppo_start must not exceed search_steps".into(),
            ));
        }
        if self.replay_capacity == 0 || self.replay_sample == 0 {
            return Err(Error::InvalidConfig("replay sizes must be positive".into()));
        }
        self.weights.validate()
    }
}

/// One line of the run log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub scheme: ConnectionScheme,
    pub probs: Vec<f64>,
    pub g_spa: f64,
    pub g_val: f64,
    /// Deterministic environment value for offline verification; equals
    /// `g_val` for noiseless environments.
    pub g_val_true: f64,
    pub g_rnd: f64,
    #[serde(rename = "G")]
    pub total: f64,
    pub pbar: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BestSeen {
    pub scheme: ConnectionScheme,
    /// Noiseless reward with the novelty term excluded.
    pub reward: f64,
}

/// Outcome of a search run.
#[derive(Debug, Clone)]
pub struct SearchRun {
    pub records: Vec<IterationRecord>,
    pub best: Option<BestSeen>,
    pub extracted: ConnectionScheme,
    pub pbar_trace: Vec<f64>,
}

/// Receives each iteration record as it is produced, e.g. a JSONL writer.
pub trait SearchObserver {
    fn on_iteration(&mut self, record: &IterationRecord) -> Result<()>;
}

/// Discards records.
pub struct NullObserver;

impl SearchObserver for NullObserver {
    fn on_iteration(&mut self, _record: &IterationRecord) -> Result<()> {
        Ok(())
    }
}

/// Writes one JSON object per line, flushing after each so aborted runs keep
/// their partial log.
pub struct JsonlObserver<W: Write> {
    writer: W,
}

impl<W: Write> JsonlObserver<W> {
    pub fn new(writer: W) -> Self {
        JsonlObserver { writer }
    }
}

impl<W: Write> SearchObserver for JsonlObserver<W> {
    fn on_iteration(&mut self, record: &IterationRecord) -> Result<()> {
        serde_json::to_writer(&mut self.writer, record)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Mutable state of an in-flight search, checkpointable mid-run.
pub struct SearchState {
    pub controller: Controller,
    pub rnd: RndPair,
    pub buffer: ReplayBuffer,
    /// Iterations already completed.
    pub completed: usize,
    pub best: Option<BestSeen>,
}

impl SearchState {
    pub fn fresh(config: &SearchConfig) -> Result<Self> {
        config.validate()?;
        let controller = Controller::new(
            &config.stage_sizes,
            &config.controller,
            &mut rng(config.seed, Stream::ControllerInit),
        )?;
        let rnd = RndPair::new(
            config.m(),
            &config.rnd,
            &mut rng(config.seed, Stream::RndTargetInit),
            &mut rng(config.seed, Stream::RndPredictorInit),
        )?;
        Ok(SearchState {
            controller,
            rnd,
            buffer: ReplayBuffer::new(config.replay_capacity),
            completed: 0,
            best: None,
        })
    }
}

/// Run the search to completion from a fresh state. On an environment failure
/// the partial log has already been flushed through the observer; when
/// `abort_checkpoint` is given, a resumable checkpoint is saved before the
/// error is returned.
pub fn run_search(
    config: &SearchConfig,
    env: &mut dyn Evaluator,
    observer: &mut dyn SearchObserver,
    abort_checkpoint: Option<&Path>,
) -> Result<SearchRun> {
    let state = SearchState::fresh(config)?;
    run_search_from(config, env, state, observer, abort_checkpoint)
}

/// Continue a search from checkpointed state.
pub fn run_search_from(
    config: &SearchConfig,
    env: &mut dyn Evaluator,
    mut state: SearchState,
    observer: &mut dyn SearchObserver,
    abort_checkpoint: Option<&Path>,
) -> Result<SearchRun> {
    config.validate()?;
    if env.m() != config.m() {
        return Err(Error::Shape {
            context: "search environment block count",
            expected: config.m(),
            actual: env.m(),
        });
    }
    let mut records = Vec::new();
    let mut pbar_trace = Vec::new();
    for t in (state.completed + 1)..=config.search_steps {
        let probs = state.controller.probs();
        let scheme = probs.sample(
            &config.stage_sizes,
            &mut rng_step(config.seed, Stream::SchemeSampling, t as u64),
        )?;
        let g_spa = sparsity_reward(&scheme);
        let (g_val, g_val_true) = match env.eval_both(&scheme) {
            Ok(v) => v,
            Err(e) => {
                if let Some(path) = abort_checkpoint {
                    state.completed = t - 1;
                    save_search_checkpoint(path, config, &state)?;
                }
                return Err(e);
            }
        };
        let g_rnd = state.rnd.bonus(&scheme)?;
        let breakdown = combine_reward(&config.weights, g_spa, g_val, g_rnd)?;
        let realized = realized_probs(&probs, &scheme)?;
        let pbar = realized.iter().sum::<f64>() / realized.len() as f64;

        state.controller.reinforce_update(&scheme, breakdown.total)?;
        state.rnd.train(&scheme)?;
        state.buffer.put(TrajectoryRecord {
            probs_old: probs.clone(),
            scheme: scheme.clone(),
            reward: breakdown.total,
            iteration: t,
        });
        if t >= config.ppo_start {
            let batch = state.buffer.sample(
                config.replay_sample,
                &mut rng_step(config.seed, Stream::ReplaySampling, t as u64),
            )?;
            state.controller.ppo_update(&batch)?;
        }

        let true_reward =
            config.weights.lambda1 * g_spa + config.weights.lambda2 * g_val_true;
        if state.best.as_ref().map_or(true, |b| true_reward > b.reward) {
            state.best = Some(BestSeen {
                scheme: scheme.clone(),
                reward: true_reward,
            });
        }

        let record = IterationRecord {
            iter: t,
            scheme,
            probs: probs.values().to_vec(),
            g_spa,
            g_val,
            g_val_true,
            g_rnd,
            total: breakdown.total,
            pbar,
        };
        observer.on_iteration(&record)?;
        pbar_trace.push(pbar);
        records.push(record);
        state.completed = t;
    }
    Ok(SearchRun {
        records,
        best: state.best.clone(),
        extracted: state.controller.extract_scheme(),
        pbar_trace,
    })
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"EANSRC1\n";

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: SearchConfig,
    completed: usize,
    best: Option<BestSeen>,
    buffer: Vec<TrajectoryRecord>,
}

/// Persist a mid-run snapshot: header JSON plus the controller network and
/// the distillation pair. Optimizer moment buffers are rebuilt on resume.
pub fn save_search_checkpoint(path: &Path, config: &SearchConfig, state: &SearchState) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    let header = CheckpointHeader {
        config: config.clone(),
        completed: state.completed,
        best: state.best.clone(),
        buffer: state.buffer.iter().cloned().collect(),
    };
    let header_json = serde_json::to_vec(&header)?;
    w.write_all(&(header_json.len() as u32).to_le_bytes())?;
    w.write_all(&header_json)?;
    write_mlp(&mut w, state.controller.net())?;
    write_mlp(&mut w, state.rnd.target())?;
    write_mlp(&mut w, state.rnd.predictor())?;
    w.flush()?;
    Ok(())
}

/// Load a snapshot saved by [`save_search_checkpoint`].
pub fn load_search_checkpoint(path: &Path) -> Result<(SearchConfig, SearchState)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::InvalidConfig("bad search checkpoint magic".into()));
    }
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let mut header_json = vec![0u8; u32::from_le_bytes(len_buf) as usize];
    r.read_exact(&mut header_json)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_json)?;
    let controller_net = read_mlp(&mut r)?;
    let target = read_mlp(&mut r)?;
    let predictor = read_mlp(&mut r)?;
    let controller = Controller::from_parts(
        controller_net,
        header.config.stage_sizes.clone(),
        header.config.controller.learning_rate,
        header.config.controller.ppo_clip,
    )?;
    let rnd = RndPair::from_parts(target, predictor, &header.config.rnd)?;
    let state = SearchState {
        controller,
        rnd,
        buffer: ReplayBuffer::from_records(header.config.replay_capacity, header.buffer),
        completed: header.completed,
        best: header.best,
    };
    Ok((header.config, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{PlantedConfig, PlantedEnv};

    fn planted_config(m: usize, seed: u64, steps: usize) -> (SearchConfig, PlantedEnv) {
        let config = SearchConfig {
            stage_sizes: vec![m],
            search_steps: steps,
            ppo_start: (steps / 10).max(1),
            seed,
            ..SearchConfig::default()
        };
        let env = PlantedEnv::generate(&PlantedConfig {
            stage_sizes: vec![m],
            interactions: 3,
            noise_std: 0.01,
            seed,
        })
        .unwrap();
        (config, env)
    }

    #[test]
    fn zero_budget_returns_initial_extraction() {
        let (config, mut env) = planted_config(8, 0, 0);
        let run = run_search(&config, &mut env, &mut NullObserver, None).unwrap();
        assert!(run.records.is_empty());
        assert!(run.best.is_none());
        assert_eq!(run.extracted.encode(), "00000000");
    }

    #[test]
    fn run_is_seed_deterministic() {
        let (config, mut env_a) = planted_config(8, 5, 60);
        let mut env_b = PlantedEnv::generate(&PlantedConfig {
            stage_sizes: vec![8],
            interactions: 3,
            noise_std: 0.01,
            seed: 5,
        })
        .unwrap();
        let a = run_search(&config, &mut env_a, &mut NullObserver, None).unwrap();
        let b = run_search(&config, &mut env_b, &mut NullObserver, None).unwrap();
        assert_eq!(a.extracted, b.extracted);
        let totals_a: Vec<f64> = a.records.iter().map(|r| r.total).collect();
        let totals_b: Vec<f64> = b.records.iter().map(|r| r.total).collect();
        assert_eq!(totals_a, totals_b);
    }

    #[test]
    fn different_seeds_diverge() {
        let (config_a, mut env_a) = planted_config(10, 1, 40);
        let (config_b, mut env_b) = planted_config(10, 2, 40);
        let a = run_search(&config_a, &mut env_a, &mut NullObserver, None).unwrap();
        let b = run_search(&config_b, &mut env_b, &mut NullObserver, None).unwrap();
        let schemes_a: Vec<String> = a.records.iter().map(|r| r.scheme.encode()).collect();
        let schemes_b: Vec<String> = b.records.iter().map(|r| r.scheme.encode()).collect();
        assert_ne!(schemes_a, schemes_b);
    }

    #[test]
    fn best_seen_trace_is_nondecreasing() {
        let (config, mut env) = planted_config(10, 3, 120);
        let mut best_trace = Vec::new();
        struct Tracker<'a> {
            env: PlantedEnv,
            weights: RewardWeights,
            trace: &'a mut Vec<f64>,
            best: f64,
        }
        impl SearchObserver for Tracker<'_> {
            fn on_iteration(&mut self, record: &IterationRecord) -> Result<()> {
                let true_reward = self.weights.lambda1 * record.g_spa
                    + self.weights.lambda2 * self.env.eval_noiseless(&record.scheme)?;
                self.best = self.best.max(true_reward);
                self.trace.push(self.best);
                Ok(())
            }
        }
        let mut tracker = Tracker {
            env: env.clone(),
            weights: config.weights,
            trace: &mut best_trace,
            best: f64::NEG_INFINITY,
        };
        let run = run_search(&config, &mut env, &mut tracker, None).unwrap();
        assert!(best_trace.windows(2).all(|w| w[1] >= w[0]));
        let final_best = run.best.unwrap();
        assert!((final_best.reward - best_trace.last().unwrap()).abs() < 1e-12);
    }

    /// Offline recomputation of g_spa and the deterministic g_val from the
    /// log matches the logged values exactly.
    #[test]
    fn log_recomputation_is_exact() {
        let (config, mut env) = planted_config(8, 7, 50);
        let offline = env.clone();
        let run = run_search(&config, &mut env, &mut NullObserver, None).unwrap();
        for rec in &run.records {
            assert_eq!(rec.g_spa, sparsity_reward(&rec.scheme));
            assert_eq!(rec.g_val_true, offline.eval_noiseless(&rec.scheme).unwrap());
            let expected_total = config.weights.lambda1 * rec.g_spa
                + config.weights.lambda2 * rec.g_val
                + config.weights.lambda3 * rec.g_rnd;
            assert!((rec.total - expected_total).abs() < 1e-12);
        }
    }

    #[test]
    fn sparsity_only_objective_extracts_all_zero() {
        for seed in 0..3 {
            let mut config = SearchConfig {
                stage_sizes: vec![8],
                search_steps: 1200,
                ppo_start: 120,
                seed,
                ..SearchConfig::default()
            };
            config.weights = RewardWeights::new(1.0, 0.0, 0.0).unwrap();
            let mut env = PlantedEnv::generate(&PlantedConfig {
                stage_sizes: vec![8],
                interactions: 2,
                noise_std: 0.0,
                seed,
            })
            .unwrap();
            let run = run_search(&config, &mut env, &mut NullObserver, None).unwrap();
            assert_eq!(
                run.extracted.encode(),
                "00000000",
                "seed {seed} extracted {}",
                run.extracted
            );
        }
    }

    #[test]
    fn environment_failure_aborts_with_checkpoint() {
        struct FailingEnv {
            remaining: usize,
            inner: PlantedEnv,
        }
        impl Evaluator for FailingEnv {
            fn m(&self) -> usize {
                self.inner.m()
            }
            fn eval(&mut self, scheme: &ConnectionScheme) -> Result<f64> {
                if self.remaining == 0 {
                    return Err(Error::Transport("simulated outage".into()));
                }
                self.remaining -= 1;
                self.inner.eval(scheme)
            }
            fn eval_true(&mut self, scheme: &ConnectionScheme) -> Result<f64> {
                self.inner.eval_true(scheme)
            }
        }
        let (config, env) = planted_config(8, 11, 50);
        let mut failing = FailingEnv {
            remaining: 12,
            inner: env,
        };
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("search.ckpt");
        let mut seen = Vec::new();
        struct Collect<'a>(&'a mut Vec<usize>);
        impl SearchObserver for Collect<'_> {
            fn on_iteration(&mut self, record: &IterationRecord) -> Result<()> {
                self.0.push(record.iter);
                Ok(())
            }
        }
        let err = run_search(&config, &mut failing, &mut Collect(&mut seen), Some(&ckpt))
            .unwrap_err();
        assert!(matches!(err, Error::Transport(_)));
        assert_eq!(seen.len(), 12);

        let (loaded_config, state) = load_search_checkpoint(&ckpt).unwrap();
        assert_eq!(loaded_config, config);
        assert_eq!(state.completed, 12);
        assert_eq!(state.buffer.len(), 12);

        // The environment recovers; the run resumes to completion.
        let mut recovered = PlantedEnv::generate(&PlantedConfig {
            stage_sizes: vec![8],
            interactions: 3,
            noise_std: 0.01,
            seed: 11,
        })
        .unwrap();
        let run =
            run_search_from(&config, &mut recovered, state, &mut NullObserver, None).unwrap();
        assert_eq!(run.records.len(), 50 - 12);
        assert_eq!(run.records.first().unwrap().iter, 13);
    }
}
