//! Synthetic Gaussian-mixture classification data with disjoint
//! train/validation/test splits, regenerated bit-identically from a seed.

use crate::error::{Error, Result};
use crate::seed::{rng, Stream};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetConfig {
    pub input_dim: usize,
    pub class_count: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub seed: u64,
    /// Number of leading input dimensions whose class means differ; the
    /// remaining dimensions carry pure noise, which gives feature gating
    /// something systematic to suppress.
    pub informative_dims: usize,
    /// Standard deviation of the per-class mean vectors.
    pub mean_scale: f64,
    /// Standard deviation of the per-sample noise around its class mean.
    pub noise_std: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            input_dim: 16,
            class_count: 8,
            train_size: 4096,
            val_size: 1024,
            test_size: 1024,
            seed: 0,
            informative_dims: 6,
            mean_scale: 1.2,
            noise_std: 1.6,
        }
    }
}

/// One split: parallel slices of inputs and labels.
#[derive(Debug, Clone, Copy)]
pub struct Split<'a> {
    pub inputs: &'a [Vec<f64>],
    pub labels: &'a [usize],
}

impl<'a> Split<'a> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ToyDataset {
    config: DatasetConfig,
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl ToyDataset {
    /// Labels cycle through the classes so every split is balanced as long as
    /// each split size is a multiple of the class count.
    pub fn generate(config: &DatasetConfig) -> Result<Self> {
        if config.input_dim == 0 || config.class_count < 2 {
            return Err(Error::InvalidConfig(
                "dataset needs input_dim > 0 and at least two classes".into(),
            ));
        }
        if config.train_size == 0 || config.val_size == 0 || config.test_size == 0 {
            return Err(Error::InvalidConfig("all split sizes must be positive".into()));
        }
        if config.informative_dims == 0 || config.informative_dims > config.input_dim {
            return Err(Error::InvalidConfig(
                "informative_dims must be in 1..=input_dim".into(),
            ));
        }
        let mut r = rng(config.seed, Stream::Dataset);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let means: Vec<Vec<f64>> = (0..config.class_count)
            .map(|_| {
                (0..config.input_dim)
                    .map(|d| {
                        if d < config.informative_dims {
                            config.mean_scale * unit.sample(&mut r)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let total = config.train_size + config.val_size + config.test_size;
        let mut inputs = Vec::with_capacity(total);
        let mut labels = Vec::with_capacity(total);
        for i in 0..total {
            let label = i % config.class_count;
            let mean = &means[label];
            inputs.push(
                mean.iter()
                    .map(|&mu| mu + config.noise_std * unit.sample(&mut r))
                    .collect(),
            );
            labels.push(label);
        }
        Ok(ToyDataset {
            config: config.clone(),
            inputs,
            labels,
        })
    }

    pub fn config(&self) -> &DatasetConfig {
        &self.config
    }

    pub fn train(&self) -> Split<'_> {
        let end = self.config.train_size;
        Split {
            inputs: &self.inputs[..end],
            labels: &self.labels[..end],
        }
    }

    pub fn val(&self) -> Split<'_> {
        let start = self.config.train_size;
        let end = start + self.config.val_size;
        Split {
            inputs: &self.inputs[start..end],
            labels: &self.labels[start..end],
        }
    }

    pub fn test(&self) -> Split<'_> {
        let start = self.config.train_size + self.config.val_size;
        Split {
            inputs: &self.inputs[start..],
            labels: &self.labels[start..],
        }
    }
}
