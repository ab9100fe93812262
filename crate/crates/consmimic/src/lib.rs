//! Constrained style learning for control policies.
//!
//! Trains a policy to maximize a demonstration-derived style objective
//! subject to a task-optimality constraint. The constraint is enforced by a
//! self-adjusting bounded Lagrangian multiplier that mixes normalized task
//! and style advantages; style rewards come from either motion-clip tracking
//! or a least-squares adversarial discriminator with symmetry-augmented
//! batches. Evaluation uses relaxed dynamic time warping.
//!
//! Crate layout mirrors the pipeline:
//!
//! - [`nn`] — dense networks, exact gradients, Adam, Gaussian policy head.
//! - [`env`] — two desk-scale environments (PointReach, PlanarGait).
//! - [`demos`] — demonstration generation, CSV I/O, symmetry augmentation.
//! - [`style`] — tracking and adversarial style rewards, discriminator.
//! - [`cmdp`] — Lagrangian multiplier state and advantage fusion.
//! - [`trainer`] — rollouts, GAE, PPO, the full training loop.
//! - [`eval`] — relaxed DTW, imitation/symmetry scores, rollout metrics.
//! - [`config`] / [`cli`] — flat key-value configs and the command line.

pub mod cli;
pub mod cmdp;
pub mod config;
pub mod demos;
pub mod env;
pub mod error;
pub mod eval;
pub mod nn;
pub mod style;
pub mod trainer;

pub use error::{Error, Result};
