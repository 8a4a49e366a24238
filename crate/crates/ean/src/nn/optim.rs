//! Parameter update rules: plain SGD and Adam.

use super::{GradientBundle, Mlp};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Whether a step moves along the gradient or against it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `params += lr * step` (e.g. reward maximization).
    Ascend,
    /// `params -= lr * step` (loss minimization).
    Descend,
}

#[derive(Debug, Clone)]
enum Kind {
    Sgd,
    Adam {
        first_moment: GradientBundle,
        second_moment: GradientBundle,
    },
}

/// Optimizer configuration plus any moment buffers it carries.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    learning_rate: f64,
    kind: Kind,
    step_count: u64,
}

impl OptimizerState {
    pub fn sgd(learning_rate: f64) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        OptimizerState {
            learning_rate,
            kind: Kind::Sgd,
            step_count: 0,
        }
    }

    /// Adam with beta1=0.9, beta2=0.999, eps=1e-8 and bias correction.
    pub fn adam(learning_rate: f64, params: &Mlp) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        OptimizerState {
            learning_rate,
            kind: Kind::Adam {
                first_moment: GradientBundle::zeros_like(params),
                second_moment: GradientBundle::zeros_like(params),
            },
            step_count: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update in place. SGD is exactly `params +/- lr * grads`.
    pub fn step(&mut self, params: &mut Mlp, grads: &GradientBundle, direction: Direction) -> Result<()> {
        if !grads.congruent_with(params) {
            return Err(Error::Shape {
                context: "optimizer step gradients",
                expected: params.parameter_count(),
                actual: grads
                    .d_weights
                    .iter()
                    .chain(grads.d_biases.iter())
                    .map(Vec::len)
                    .sum(),
            });
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite {
                context: "optimizer step gradients",
            });
        }
        let sign = match direction {
            Direction::Ascend => 1.0,
            Direction::Descend => -1.0,
        };
        self.step_count += 1;
        match &mut self.kind {
            Kind::Sgd => {
                let lr = self.learning_rate;
                for (l, layer) in params.layers.iter_mut().enumerate() {
                    for (w, g) in layer.weights.iter_mut().zip(&grads.d_weights[l]) {
                        *w += sign * lr * g;
                    }
                    for (b, g) in layer.biases.iter_mut().zip(&grads.d_biases[l]) {
                        *b += sign * lr * g;
                    }
                }
            }
            Kind::Adam {
                first_moment,
                second_moment,
            } => {
                let lr = self.learning_rate;
                let t = self.step_count as i32;
                let corr1 = 1.0 - ADAM_BETA1.powi(t);
                let corr2 = 1.0 - ADAM_BETA2.powi(t);
                let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / corr1;
                    let v_hat = *v / corr2;
                    *p += sign * lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                };
                for (l, layer) in params.layers.iter_mut().enumerate() {
                    for ((w, m), (v, g)) in layer
                        .weights
                        .iter_mut()
                        .zip(&mut first_moment.d_weights[l])
                        .zip(second_moment.d_weights[l].iter_mut().zip(&grads.d_weights[l]))
                    {
                        update(w, m, v, *g);
                    }
                    for ((b, m), (v, g)) in layer
                        .biases
                        .iter_mut()
                        .zip(&mut first_moment.d_biases[l])
                        .zip(second_moment.d_biases[l].iter_mut().zip(&grads.d_biases[l]))
                    {
                        update(b, m, v, *g);
                    }
                }
            }
        }
        if !params.params_finite() {
            return Err(Error::NonFinite {
                context: "parameters after optimizer step",
            });
        }
        Ok(())
    }
}
