//! First-order adaptive optimizer with bias correction.

use super::Mlp;

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// What a call to [`AdamState::step`] did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// Gradient contained a non-finite value; parameters left untouched.
    SkippedNonFinite,
}

/// Per-parameter first/second moment accumulators plus a step counter.
///
/// Moments mirror the shapes handed to [`AdamState::new`]; the same slice
/// order must be used on every step.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub cfg: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, shapes: &[usize]) -> Self {
        AdamState {
            cfg,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Moment buffers sized for every weight/bias tensor of `mlp`, in
    /// [`Mlp::param_slices_mut`] order.
    pub fn for_mlp(cfg: AdamConfig, mlp: &Mlp) -> Self {
        let shapes: Vec<usize> = mlp
            .layers()
            .iter()
            .flat_map(|l| [l.weight.len(), l.bias.len()])
            .collect();
        AdamState::new(cfg, &shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Bias-corrected update applied in place. A non-finite gradient skips
    /// the whole update (including the step counter) and reports it.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> StepOutcome {
        assert_eq!(params.len(), self.m.len(), "parameter group count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient group count mismatch");
        for (p, g) in params.iter().zip(grads) {
            assert_eq!(p.len(), g.len(), "parameter/gradient shape mismatch");
        }
        if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
            return StepOutcome::SkippedNonFinite;
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.cfg.beta1.powi(t);
        let c2 = 1.0 - self.cfg.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.len() {
                m[i] = self.cfg.beta1 * m[i] + (1.0 - self.cfg.beta1) * g[i];
                v[i] = self.cfg.beta2 * v[i] + (1.0 - self.cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
            }
        }
        StepOutcome::Applied
    }
}
