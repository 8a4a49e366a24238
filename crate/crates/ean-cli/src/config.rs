//! One flat JSON configuration document per run. Every key has a default;
//! unknown keys are rejected with the offending field named. Values are
//! resolved in order: defaults, then the config file, then `EAN_*`
//! environment variables, then command-line flags.

use ean::controller::ControllerConfig;
use ean::curiosity::RndConfig;
use ean::env::RewardWeights;
use ean::error::{Error, Result};
use ean::search::SearchConfig;
use ean::supernet::{DatasetConfig, SharingMode, SupernetConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const ENV_PREFIX: &str = "EAN_";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// "planted", "supernet", or "external:<endpoint>".
    pub env: String,

    // Geometry shared by the supernet, the controller, and the baselines.
    pub stage_sizes: Vec<usize>,
    pub stage_widths: Vec<usize>,
    pub block_hidden: usize,
    pub attention_bottleneck: usize,
    /// "share_full" or "org_full".
    pub sharing_mode: String,
    pub class_count: usize,

    // Dataset.
    pub dataset_seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub dataset_informative_dims: usize,
    pub dataset_mean_scale: f64,
    pub dataset_noise_std: f64,

    // Supernet training.
    pub pretrain_steps: usize,
    pub batch_size: usize,
    pub supernet_learning_rate: f64,
    pub scratch_steps: usize,

    // Search.
    pub search_steps: usize,
    pub ppo_start: usize,
    pub learning_rate: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub replay_capacity: usize,
    pub replay_sample: usize,
    pub controller_input_dim: usize,
    pub controller_hidden: Vec<usize>,
    pub ppo_clip: Option<f64>,

    // Novelty bonus.
    pub rnd_hidden: usize,
    pub rnd_embed: usize,
    pub rnd_learning_rate: f64,
    pub rnd_normalize: bool,

    // Planted environment.
    pub planted_interactions: usize,
    pub planted_noise_std: f64,
    pub planted_seed: u64,

    // Wire protocol.
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub retry_limit: u32,

    // Artifacts consumed by commands.
    /// Supernet checkpoint path, required by supernet search, correlate,
    /// and serve.
    pub checkpoint: Option<String>,
    /// Scheme string for bench; all-zero when absent.
    pub scheme: Option<String>,

    // Command-specific knobs.
    pub bench_batch: usize,
    pub bench_reps: usize,
    pub draws: usize,
    pub correlate_schemes: usize,
    pub hsp_period: usize,
    pub hsp_offset: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let supernet = SupernetConfig::default();
        let dataset = DatasetConfig::default();
        let search = SearchConfig::default();
        let controller = ControllerConfig::default();
        let rnd = RndConfig::default();
        RunConfig {
            seed: 0,
            env: "planted".into(),
            stage_sizes: supernet.stage_sizes.clone(),
            stage_widths: supernet.stage_widths.clone(),
            block_hidden: supernet.block_hidden,
            attention_bottleneck: supernet.attention_bottleneck,
            sharing_mode: "share_full".into(),
            class_count: supernet.class_count,
            dataset_seed: dataset.seed,
            train_size: dataset.train_size,
            val_size: dataset.val_size,
            test_size: dataset.test_size,
            dataset_informative_dims: dataset.informative_dims,
            dataset_mean_scale: dataset.mean_scale,
            dataset_noise_std: dataset.noise_std,
            pretrain_steps: search.pretrain_steps,
            batch_size: supernet.batch_size,
            supernet_learning_rate: supernet.learning_rate,
            scratch_steps: supernet.scratch_steps,
            search_steps: search.search_steps,
            ppo_start: search.ppo_start,
            learning_rate: controller.learning_rate,
            lambda1: search.weights.lambda1,
            lambda2: search.weights.lambda2,
            lambda3: search.weights.lambda3,
            replay_capacity: search.replay_capacity,
            replay_sample: search.replay_sample,
            controller_input_dim: controller.input_dim,
            controller_hidden: controller.hidden_dims.clone(),
            ppo_clip: controller.ppo_clip,
            rnd_hidden: rnd.hidden_dim,
            rnd_embed: rnd.embed_dim,
            rnd_learning_rate: rnd.learning_rate,
            rnd_normalize: rnd.normalize,
            planted_interactions: 4,
            planted_noise_std: 0.01,
            planted_seed: 0,
            endpoint: None,
            timeout_ms: 30_000,
            retry_limit: 2,
            checkpoint: None,
            scheme: None,
            bench_batch: 50,
            bench_reps: 200,
            draws: 180,
            correlate_schemes: 20,
            hsp_period: 2,
            hsp_offset: 0,
        }
    }
}

impl RunConfig {
    /// Load the config file (when given), apply `EAN_*` environment variable
    /// overrides, and validate. Unknown or ill-typed fields name the key.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::InvalidConfig(format!("cannot read {}: {e}", p.display()))
                })?;
                serde_json::from_str::<serde_json::Value>(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?
            }
            None => serde_json::json!({}),
        };
        let object = doc
            .as_object_mut()
            .ok_or_else(|| Error::InvalidConfig("config root must be a JSON object".into()))?;
        for (key, value) in std::env::vars() {
            if let Some(config_key) = key.strip_prefix(ENV_PREFIX) {
                let config_key = config_key.to_lowercase();
                // Values parse as JSON when possible, else as strings.
                let parsed = serde_json::from_str::<serde_json::Value>(&value)
                    .unwrap_or(serde_json::Value::String(value));
                object.insert(config_key, parsed);
            }
        }
        let deserializer = doc.clone();
        let config: RunConfig = serde_path_to_error::deserialize(&deserializer)
            .map_err(|e| Error::InvalidConfig(format!("field {}: {}", e.path(), e.inner())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.sharing_mode_enum()?;
        self.weights()?;
        if self.stage_sizes.is_empty() || self.stage_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("field stage_sizes: must be positive".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> Result<RewardWeights> {
        RewardWeights::new(self.lambda1, self.lambda2, self.lambda3)
            .map_err(|e| Error::InvalidConfig(format!("field lambda1/lambda2/lambda3: {e}")))
    }

    fn sharing_mode_enum(&self) -> Result<SharingMode> {
        match self.sharing_mode.as_str() {
            "share_full" => Ok(SharingMode::ShareFull),
            "org_full" => Ok(SharingMode::OrgFull),
            other => Err(Error::InvalidConfig(format!(
                "field sharing_mode: {other:?} is not share_full or org_full"
            ))),
        }
    }

    pub fn supernet_config(&self) -> Result<SupernetConfig> {
        Ok(SupernetConfig {
            stage_sizes: self.stage_sizes.clone(),
            stage_widths: self.stage_widths.clone(),
            block_hidden: self.block_hidden,
            attention_bottleneck: self.attention_bottleneck,
            sharing_mode: self.sharing_mode_enum()?,
            class_count: self.class_count,
            dataset_seed: self.dataset_seed,
            batch_size: self.batch_size,
            learning_rate: self.supernet_learning_rate,
            scratch_steps: self.scratch_steps,
        })
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            input_dim: self.stage_widths[0],
            class_count: self.class_count,
            train_size: self.train_size,
            val_size: self.val_size,
            test_size: self.test_size,
            seed: self.dataset_seed,
            informative_dims: self.dataset_informative_dims,
            mean_scale: self.dataset_mean_scale,
            noise_std: self.dataset_noise_std,
        }
    }

    pub fn search_config(&self) -> Result<SearchConfig> {
        Ok(SearchConfig {
            stage_sizes: self.stage_sizes.clone(),
            pretrain_steps: self.pretrain_steps,
            search_steps: self.search_steps,
            ppo_start: self.ppo_start,
            weights: self.weights()?,
            replay_capacity: self.replay_capacity,
            replay_sample: self.replay_sample,
            seed: self.seed,
            controller: ControllerConfig {
                input_dim: self.controller_input_dim,
                hidden_dims: self.controller_hidden.clone(),
                learning_rate: self.learning_rate,
                ppo_clip: self.ppo_clip,
            },
            rnd: RndConfig {
                hidden_dim: self.rnd_hidden,
                embed_dim: self.rnd_embed,
                learning_rate: self.rnd_learning_rate,
                normalize: self.rnd_normalize,
            },
            env: self.env.clone(),
        })
    }

    pub fn planted_config(&self) -> ean::env::PlantedConfig {
        ean::env::PlantedConfig {
            stage_sizes: self.stage_sizes.clone(),
            interactions: self.planted_interactions,
            noise_std: self.planted_noise_std,
            seed: self.planted_seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        cfg.supernet_config().unwrap();
        cfg.search_config().unwrap();
        assert_eq!(cfg.stage_sizes.iter().sum::<usize>(), 18);
    }

    #[test]
    fn unknown_field_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"search_stepz": 10}"#).unwrap();
        let err = RunConfig::load(Some(&path)).unwrap_err();
        assert!(err.to_string().contains("search_stepz"), "{err}");
    }

    #[test]
    fn ill_typed_field_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"search_steps": "many"}"#).unwrap();
        let err = RunConfig::load(Some(&path)).unwrap_err();
        assert!(err.to_string().contains("search_steps"), "{err}");
    }

    #[test]
    fn file_values_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 9, "stage_sizes": [2, 3]}"#).unwrap();
        let cfg = RunConfig::load(Some(&path)).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.stage_sizes, vec![2, 3]);
        assert_eq!(cfg.draws, 180);
    }
}
