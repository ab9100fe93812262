//! Diagonal-Gaussian policy head over an MLP mean network.

use super::{Activation, Checkpoint, Mlp};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

pub const LOG_STD_MIN: f64 = -4.0;
pub const LOG_STD_MAX: f64 = 1.0;

const LN_2PI: f64 = 1.8378770664093453;

/// Stochastic policy: `a ~ N(mean(obs), diag(exp(2 * log_std)))` with a
/// state-independent log-std vector clamped to `[-4, 1]`.
#[derive(Clone, Debug)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    log_std: Vec<f64>,
}

impl GaussianPolicy {
    /// Mean network `[obs_dim, hidden..., action_dim]` with a small output
    /// gain so initial actions stay near zero; log-std starts at 0.
    pub fn new<R: Rng>(obs_dim: usize, hidden: &[usize], action_dim: usize, rng: &mut R) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(obs_dim);
        dims.extend_from_slice(hidden);
        dims.push(action_dim);
        let mean = Mlp::new(&dims, Activation::Elu, 0.01, rng)?;
        Ok(GaussianPolicy {
            mean,
            log_std: vec![0.0; action_dim],
        })
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.mean.input_dim()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn log_std_mut(&mut self) -> &mut Vec<f64> {
        &mut self.log_std
    }

    /// Re-applies the `[-4, 1]` clamp; call after optimizer updates.
    pub fn clamp_log_std(&mut self) {
        for l in &mut self.log_std {
            *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    /// Draws an action and returns its exact log-density.
    pub fn sample<R: Rng>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean.forward(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let log_prob = self.log_prob_given_mean(&mean, &action);
        Ok((action, log_prob))
    }

    /// Deterministic evaluation mode: the mean action.
    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean.forward(obs)
    }

    /// Log-density of `action` under the Gaussian centered at `mean`.
    pub fn log_prob_given_mean(&self, mean: &[f64], action: &[f64]) -> f64 {
        let mut lp = 0.0;
        for ((m, a), ls) in mean.iter().zip(action).zip(&self.log_std) {
            let z = (a - m) / ls.exp();
            lp += -0.5 * LN_2PI - ls - 0.5 * z * z;
        }
        lp
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.action_dim(),
                got: action.len(),
                context: "policy action",
            });
        }
        let mean = self.mean.forward(obs)?;
        Ok(self.log_prob_given_mean(&mean, &action.to_vec()))
    }

    /// Gradients of the log-density w.r.t. the mean vector and log-std:
    /// `d lp / d mean_i = (a_i - m_i) / sigma_i^2`,
    /// `d lp / d log_std_i = z_i^2 - 1`.
    pub fn log_prob_grads(&self, mean: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut d_mean = Vec::with_capacity(mean.len());
        let mut d_log_std = Vec::with_capacity(mean.len());
        for ((m, a), ls) in mean.iter().zip(action).zip(&self.log_std) {
            let sigma = ls.exp();
            let z = (a - m) / sigma;
            d_mean.push(z / sigma);
            d_log_std.push(z * z - 1.0);
        }
        (d_mean, d_log_std)
    }

    /// Differential entropy of the diagonal Gaussian; state-independent.
    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|ls| ls + 0.5 * (1.0 + LN_2PI))
            .sum()
    }

    pub fn write_checkpoint(&self, ckpt: &mut Checkpoint, prefix: &str) {
        self.mean.write_checkpoint(ckpt, &format!("{prefix}.mean"));
        ckpt.insert(
            format!("{prefix}.log_std"),
            vec![self.log_std.len()],
            self.log_std.clone(),
        );
    }

    pub fn read_checkpoint(&mut self, ckpt: &Checkpoint, prefix: &str) -> Result<()> {
        self.mean.read_checkpoint(ckpt, &format!("{prefix}.mean"))?;
        let ls = ckpt.get(&format!("{prefix}.log_std"))?;
        if ls.data.len() != self.log_std.len() {
            return Err(Error::Checkpoint(format!(
                "{prefix}.log_std: expected {} values, got {}",
                self.log_std.len(),
                ls.data.len()
            )));
        }
        self.log_std.copy_from_slice(&ls.data);
        self.clamp_log_std();
        Ok(())
    }
}
