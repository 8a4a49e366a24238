//! Search engine for sparse attention-module connection schemes in residual
//! networks.
//!
//! A residual backbone with `m` blocks can plug a shared gating module into
//! any subset of its blocks; the subset is a length-`m` bit vector called a
//! connection scheme. This crate implements the full search stack over that
//! space: a feed-forward controller trained with policy gradients and
//! importance-weighted replay, a sparsity reward, a novelty bonus from random
//! network distillation, reward environments (a planted synthetic landscape,
//! a toy residual supernet with weight sharing, and a newline-delimited JSON
//! wire protocol for external evaluators), plus brute-force enumeration,
//! random and periodic baselines, an inference-latency harness, and a
//! proxy-fidelity correlation analysis.

pub mod controller;
pub mod curiosity;
pub mod env;
pub mod error;
pub mod nn;
pub mod scheme;
pub mod search;
pub mod seed;
pub mod supernet;

pub use error::{Error, Result};
