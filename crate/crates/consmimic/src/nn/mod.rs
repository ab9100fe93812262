//! Minimal dense-network core: multilayer perceptrons with exact
//! reverse-mode gradients, an Adam optimizer, and a diagonal-Gaussian
//! policy head.
//!
//! Everything is plain `f64` on the CPU. Parameter containers are
//! single-writer: callers serialize updates, forward passes on distinct
//! networks may run concurrently.

mod adam;
mod checkpoint;
mod policy;

pub use adam::{AdamConfig, AdamState, StepOutcome};
pub use checkpoint::{Checkpoint, NamedArray};
pub use policy::GaussianPolicy;

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Element-wise activation applied after a dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Elu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp() - 1.0
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// First derivative evaluated at the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative evaluated at the pre-activation `x`.
    ///
    /// Used by [`Mlp::grad_of_input_gradient`], which differentiates the
    /// input-gradient computation a second time.
    #[inline]
    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    0.0
                } else {
                    x.exp()
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Identity => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Elu => "elu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "elu" => Ok(Activation::Elu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation `{other}` (expected elu|tanh|identity)"
            ))),
        }
    }
}

/// One dense layer: `y = activation(W x + b)`, weights row-major `(out, in)`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
    in_dim: usize,
    out_dim: usize,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn forward_into(&self, input: &[f64], pre: &mut Vec<f64>, post: &mut Vec<f64>) {
        pre.clear();
        post.clear();
        for o in 0..self.out_dim {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let mut z = self.bias[o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            pre.push(z);
            post.push(self.activation.apply(z));
        }
    }

    /// `out = W^T v`, accumulated into a cleared buffer.
    fn transpose_mul(&self, v: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.in_dim, 0.0);
        for o in 0..self.out_dim {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let vo = v[o];
            for (acc, w) in out.iter_mut().zip(row) {
                *acc += w * vo;
            }
        }
    }
}

/// Per-layer parameter gradients plus the gradient w.r.t. the input.
#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
    pub input: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LayerGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weight: vec![0.0; l.weight.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            input: vec![0.0; mlp.input_dim()],
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|g| *g = 0.0);
            l.bias.iter_mut().for_each(|g| *g = 0.0);
        }
        self.input.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn add_scaled(&mut self, other: &MlpGrads, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (g, h) in a.weight.iter_mut().zip(&b.weight) {
                *g += scale * h;
            }
            for (g, h) in a.bias.iter_mut().zip(&b.bias) {
                *g += scale * h;
            }
        }
        for (g, h) in self.input.iter_mut().zip(&other.input) {
            *g += scale * h;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|g| *g *= s);
            l.bias.iter_mut().for_each(|g| *g *= s);
        }
        self.input.iter_mut().for_each(|g| *g *= s);
    }

    /// Flat views over the parameter gradients, in the same order as
    /// [`Mlp::param_slices_mut`].
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            out.push(l.weight.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().all(|g| g.is_finite()) && l.bias.iter().all(|g| g.is_finite()))
            && self.input.iter().all(|g| g.is_finite())
    }
}

/// Activation cache from the most recent training-mode forward pass.
#[derive(Clone, Debug)]
struct Tape {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

/// Fully connected network with per-layer activations.
///
/// Consecutive layer dimensions chain by construction and all parameters
/// stay finite (checked when loading from a checkpoint).
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<Dense>,
    cache: Option<Tape>,
}

impl Mlp {
    /// Builds a network with dimensions `dims = [in, h1, ..., out]`.
    ///
    /// Hidden layers use `hidden` with gain 1.0; the output layer is
    /// identity-activated and scaled by `output_gain`. Weights start from
    /// an orthogonalized Gaussian draw, biases at zero.
    pub fn new<R: Rng>(
        dims: &[usize],
        hidden: Activation,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidConfig(
                "mlp needs at least input and output dimensions".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("mlp layer dimensions must be > 0".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for k in 0..dims.len() - 1 {
            let (in_dim, out_dim) = (dims[k], dims[k + 1]);
            let last = k == dims.len() - 2;
            let gain = if last { output_gain } else { 1.0 };
            let activation = if last { Activation::Identity } else { hidden };
            let weight = orthogonal_init(out_dim, in_dim, gain, rng);
            layers.push(Dense {
                weight,
                bias: vec![0.0; out_dim],
                activation,
                in_dim,
                out_dim,
            });
        }
        Ok(Mlp { layers, cache: None })
    }

    /// Builds a network directly from layers (used by checkpoint loading).
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("mlp needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::InvalidConfig(format!(
                    "layer dimensions do not chain: {} -> {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        if layers
            .iter()
            .any(|l| l.weight.iter().chain(&l.bias).any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite("mlp parameters"));
        }
        Ok(Mlp { layers, cache: None })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
                context: "mlp input",
            });
        }
        Ok(())
    }

    /// Inference-mode forward pass; does not touch the backward cache.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut pre = Vec::new();
        let mut post = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut pre, &mut post);
            std::mem::swap(&mut cur, &mut post);
        }
        Ok(cur)
    }

    /// Forward pass that caches activations for a following [`Mlp::backward`].
    pub fn forward_train(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut posts = Vec::with_capacity(self.layers.len());
        let mut cur = input;
        for layer in &self.layers {
            let mut pre = Vec::new();
            let mut post = Vec::new();
            layer.forward_into(cur, &mut pre, &mut post);
            pres.push(pre);
            posts.push(post);
            cur = posts.last().unwrap();
        }
        let out = cur.to_vec();
        self.cache = Some(Tape {
            input: input.to_vec(),
            pre: pres,
            post: posts,
        });
        Ok(out)
    }

    /// Exact reverse-mode gradients of `output . upstream` w.r.t. all
    /// parameters and the input. Consumes the cache from the matching
    /// [`Mlp::forward_train`] call.
    pub fn backward(&mut self, upstream: &[f64]) -> Result<MlpGrads> {
        let tape = self.cache.take().ok_or(Error::BackwardWithoutForward)?;
        if upstream.len() != self.output_dim() {
            self.cache = Some(tape);
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
                context: "mlp upstream gradient",
            });
        }
        let mut layer_grads: Vec<LayerGrads> = self
            .layers
            .iter()
            .map(|l| LayerGrads {
                weight: vec![0.0; l.weight.len()],
                bias: vec![0.0; l.bias.len()],
            })
            .collect();

        let mut delta = upstream.to_vec();
        let mut next_delta = Vec::new();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let pre = &tape.pre[k];
            let below = if k == 0 { &tape.input } else { &tape.post[k - 1] };
            // dL/dz for this layer
            for (d, z) in delta.iter_mut().zip(pre) {
                *d *= layer.activation.derivative(*z);
            }
            let lg = &mut layer_grads[k];
            for o in 0..layer.out_dim {
                let d = delta[o];
                lg.bias[o] = d;
                let row = &mut lg.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, x) in row.iter_mut().zip(below) {
                    *g = d * x;
                }
            }
            layer.transpose_mul(&delta, &mut next_delta);
            std::mem::swap(&mut delta, &mut next_delta);
        }
        Ok(MlpGrads {
            layers: layer_grads,
            input: delta,
        })
    }

    /// Like [`Mlp::backward`] but accumulates `scale * grads` into `acc`
    /// instead of allocating a fresh gradient container.
    pub fn backward_into(&mut self, upstream: &[f64], scale: f64, acc: &mut MlpGrads) -> Result<()> {
        let tape = self.cache.take().ok_or(Error::BackwardWithoutForward)?;
        if upstream.len() != self.output_dim() {
            self.cache = Some(tape);
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
                context: "mlp upstream gradient",
            });
        }
        let mut delta = upstream.to_vec();
        let mut next_delta = Vec::new();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let pre = &tape.pre[k];
            let below = if k == 0 { &tape.input } else { &tape.post[k - 1] };
            for (d, z) in delta.iter_mut().zip(pre) {
                *d *= layer.activation.derivative(*z);
            }
            let lg = &mut acc.layers[k];
            for o in 0..layer.out_dim {
                let d = scale * delta[o];
                lg.bias[o] += d;
                let row = &mut lg.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, x) in row.iter_mut().zip(below) {
                    *g += d * x;
                }
            }
            layer.transpose_mul(&delta, &mut next_delta);
            std::mem::swap(&mut delta, &mut next_delta);
        }
        for (g, d) in acc.input.iter_mut().zip(&delta) {
            *g += scale * d;
        }
        Ok(())
    }

    /// Parameter gradients of `u . grad_x(output)` for scalar-output
    /// networks, computed with a tangent forward pass followed by a reverse
    /// sweep. `u` is treated as a constant.
    ///
    /// With `u = 2 * grad_x(output)` this yields the exact parameter
    /// gradient of the squared input-gradient norm, which is what the
    /// discriminator's gradient penalty needs.
    pub fn grad_of_input_gradient(&self, input: &[f64], u: &[f64]) -> Result<MlpGrads> {
        let mut acc = MlpGrads::zeros_like(self);
        self.grad_of_input_gradient_into(input, u, 1.0, &mut acc)?;
        Ok(acc)
    }

    /// Accumulating variant of [`Mlp::grad_of_input_gradient`].
    pub fn grad_of_input_gradient_into(
        &self,
        input: &[f64],
        u: &[f64],
        scale: f64,
        acc: &mut MlpGrads,
    ) -> Result<()> {
        self.check_input(input)?;
        if u.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: u.len(),
                context: "input-gradient weighting vector",
            });
        }
        if self.output_dim() != 1 {
            return Err(Error::InvalidState(
                "grad_of_input_gradient requires a scalar-output network".into(),
            ));
        }

        let n = self.layers.len();
        // Tangent-augmented forward: value path (pre/post) and tangent path
        // (tpre/tpost) with the input tangent set to u.
        let mut pre = Vec::with_capacity(n);
        let mut post = Vec::with_capacity(n);
        let mut tpre = Vec::with_capacity(n);
        let mut tpost = Vec::with_capacity(n);
        {
            let mut a: Vec<f64> = input.to_vec();
            let mut t: Vec<f64> = u.to_vec();
            for layer in &self.layers {
                let mut z = Vec::with_capacity(layer.out_dim);
                let mut tz = Vec::with_capacity(layer.out_dim);
                for o in 0..layer.out_dim {
                    let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                    let mut zv = layer.bias[o];
                    let mut tv = 0.0;
                    for ((w, x), tx) in row.iter().zip(&a).zip(&t) {
                        zv += w * x;
                        tv += w * tx;
                    }
                    z.push(zv);
                    tz.push(tv);
                }
                let az: Vec<f64> = z.iter().map(|&zv| layer.activation.apply(zv)).collect();
                let at: Vec<f64> = z
                    .iter()
                    .zip(&tz)
                    .map(|(&zv, &tv)| layer.activation.derivative(zv) * tv)
                    .collect();
                pre.push(z);
                tpre.push(tz);
                a = az.clone();
                t = at.clone();
                post.push(az);
                tpost.push(at);
            }
        }

        // Reverse sweep over the tangent-augmented graph. r = dh/d(post),
        // q = dh/d(tangent post), where h = tangent output.
        let mut r = vec![0.0];
        let mut q = vec![1.0];
        let mut rz = Vec::new();
        let mut qz = Vec::new();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let z = &pre[k];
            let tz = &tpre[k];
            rz.clear();
            qz.clear();
            for o in 0..layer.out_dim {
                let d1 = layer.activation.derivative(z[o]);
                let d2 = layer.activation.second_derivative(z[o]);
                rz.push(r[o] * d1 + q[o] * d2 * tz[o]);
                qz.push(q[o] * d1);
            }
            let (below, tbelow): (&[f64], &[f64]) = if k == 0 {
                (input, u)
            } else {
                (&post[k - 1], &tpost[k - 1])
            };
            let lg = &mut acc.layers[k];
            for o in 0..layer.out_dim {
                lg.bias[o] += scale * rz[o];
                let row = &mut lg.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (i, g) in row.iter_mut().enumerate() {
                    *g += scale * (rz[o] * below[i] + qz[o] * tbelow[i]);
                }
            }
            let mut nr = vec![0.0; layer.in_dim];
            let mut nq = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (i, w) in row.iter().enumerate() {
                    nr[i] += w * rz[o];
                    nq[i] += w * qz[o];
                }
            }
            r = nr;
            q = nq;
        }
        Ok(())
    }

    /// Gradient of the scalar output w.r.t. the input (inference mode, no
    /// cache involved). Also returns the output value.
    pub fn value_and_input_gradient(&self, input: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_input(input)?;
        if self.output_dim() != 1 {
            return Err(Error::InvalidState(
                "value_and_input_gradient requires a scalar-output network".into(),
            ));
        }
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut posts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        {
            let mut cur = input;
            for layer in &self.layers {
                let mut pre = Vec::new();
                let mut post = Vec::new();
                layer.forward_into(cur, &mut pre, &mut post);
                pres.push(pre);
                posts.push(post);
                cur = posts.last().unwrap();
            }
        }
        let value = posts.last().unwrap()[0];
        let mut delta = vec![1.0];
        let mut next_delta = Vec::new();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            for (d, z) in delta.iter_mut().zip(&pres[k]) {
                *d *= layer.activation.derivative(*z);
            }
            layer.transpose_mul(&delta, &mut next_delta);
            std::mem::swap(&mut delta, &mut next_delta);
        }
        Ok((value, delta))
    }

    /// Mutable flat views over all parameters: weight then bias per layer.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for layer in &mut self.layers {
            let Dense { weight, bias, .. } = layer;
            out.push(weight.as_mut_slice());
            out.push(bias.as_mut_slice());
        }
        out
    }

    /// Writes all parameters into `ckpt` under `prefix.layer{k}.{weight,bias}`.
    pub fn write_checkpoint(&self, ckpt: &mut Checkpoint, prefix: &str) {
        for (k, layer) in self.layers.iter().enumerate() {
            ckpt.insert(
                format!("{prefix}.layer{k}.weight"),
                vec![layer.out_dim, layer.in_dim],
                layer.weight.clone(),
            );
            ckpt.insert(
                format!("{prefix}.layer{k}.bias"),
                vec![layer.out_dim],
                layer.bias.clone(),
            );
        }
    }

    /// Restores parameters previously written by [`Mlp::write_checkpoint`].
    /// Shapes must match the current architecture.
    pub fn read_checkpoint(&mut self, ckpt: &Checkpoint, prefix: &str) -> Result<()> {
        for (k, layer) in self.layers.iter_mut().enumerate() {
            let w = ckpt.get(&format!("{prefix}.layer{k}.weight"))?;
            let b = ckpt.get(&format!("{prefix}.layer{k}.bias"))?;
            if w.shape != [layer.out_dim, layer.in_dim] {
                return Err(Error::Checkpoint(format!(
                    "{prefix}.layer{k}.weight: shape {:?} does not match ({}, {})",
                    w.shape, layer.out_dim, layer.in_dim
                )));
            }
            if b.shape != [layer.out_dim] {
                return Err(Error::Checkpoint(format!(
                    "{prefix}.layer{k}.bias: shape {:?} does not match ({},)",
                    b.shape, layer.out_dim
                )));
            }
            if w.data.iter().chain(&b.data).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("checkpoint parameters"));
            }
            layer.weight.copy_from_slice(&w.data);
            layer.bias.copy_from_slice(&b.data);
        }
        self.cache = None;
        Ok(())
    }
}

/// Orthogonalized Gaussian initialization, scaled by `gain`.
///
/// Orthonormalizes along the shorter matrix dimension with modified
/// Gram-Schmidt, matching the usual orthogonal init for dense layers.
fn orthogonal_init<R: Rng>(out_dim: usize, in_dim: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..out_dim * in_dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    if out_dim <= in_dim {
        // Orthonormalize rows.
        for r in 0..out_dim {
            for prev in 0..r {
                let dot: f64 = (0..in_dim)
                    .map(|c| w[r * in_dim + c] * w[prev * in_dim + c])
                    .sum();
                for c in 0..in_dim {
                    w[r * in_dim + c] -= dot * w[prev * in_dim + c];
                }
            }
            let norm: f64 = (0..in_dim)
                .map(|c| w[r * in_dim + c] * w[r * in_dim + c])
                .sum::<f64>()
                .sqrt()
                .max(1e-12);
            for c in 0..in_dim {
                w[r * in_dim + c] /= norm;
            }
        }
    } else {
        // Orthonormalize columns.
        for c in 0..in_dim {
            for prev in 0..c {
                let dot: f64 = (0..out_dim)
                    .map(|r| w[r * in_dim + c] * w[r * in_dim + prev])
                    .sum();
                for r in 0..out_dim {
                    w[r * in_dim + c] -= dot * w[r * in_dim + prev];
                }
            }
            let norm: f64 = (0..out_dim)
                .map(|r| w[r * in_dim + c] * w[r * in_dim + c])
                .sum::<f64>()
                .sqrt()
                .max(1e-12);
            for r in 0..out_dim {
                w[r * in_dim + c] /= norm;
            }
        }
    }
    for v in &mut w {
        *v *= gain;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Independent naive forward pass: explicit triple loop, no shared code
    /// with `Mlp::forward`.
    fn naive_forward(mlp: &Mlp, input: &[f64]) -> Vec<f64> {
        let mut cur = input.to_vec();
        for layer in mlp.layers() {
            let mut next = Vec::with_capacity(layer.out_dim());
            for o in 0..layer.out_dim() {
                let mut z = layer.bias[o];
                for i in 0..layer.in_dim() {
                    z += layer.weight[o * layer.in_dim() + i] * cur[i];
                }
                next.push(layer.activation.apply(z));
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn zero_weight_network_outputs_bias() {
        let mut net = Mlp::new(&[3, 2], Activation::Elu, 1.0, &mut rng(0)).unwrap();
        for w in &mut net.layers_mut()[0].weight {
            *w = 0.0;
        }
        net.layers_mut()[0].bias.copy_from_slice(&[0.7, -0.3]);
        let out = net.forward(&[5.0, -2.0, 11.0]).unwrap();
        assert_eq!(out, vec![0.7, -0.3]);
    }

    #[test]
    fn single_identity_layer_is_affine() {
        let mut net = Mlp::new(&[2, 2], Activation::Elu, 1.0, &mut rng(1)).unwrap();
        net.layers_mut()[0].weight.copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        net.layers_mut()[0].bias.copy_from_slice(&[0.5, -0.5]);
        let out = net.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(out, vec![3.5, 6.5]);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let mut r = rng(42);
        let net = Mlp::new(&[4, 8, 3], Activation::Elu, 1.0, &mut r).unwrap();
        let input: Vec<f64> = (0..4).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let got = net.forward(&input).unwrap();
        let want = naive_forward(&net, &input);
        for (g, w) in got.iter().zip(&want) {
            assert_relative_eq!(g, w, max_relative = 1e-12);
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = Mlp::new(&[4, 2], Activation::Elu, 1.0, &mut rng(0)).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut net = Mlp::new(&[2, 2], Activation::Elu, 1.0, &mut rng(0)).unwrap();
        assert!(matches!(
            net.backward(&[1.0, 0.0]),
            Err(Error::BackwardWithoutForward)
        ));
    }

    #[test]
    fn constant_network_gradients() {
        // Zero weights and biases: deeper-layer weight gradients vanish,
        // final bias gradient equals the upstream gradient.
        let mut net = Mlp::new(&[3, 4, 2], Activation::Identity, 1.0, &mut rng(0)).unwrap();
        for layer in net.layers_mut() {
            layer.weight.iter_mut().for_each(|w| *w = 0.0);
            layer.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        net.forward_train(&[1.0, 2.0, 3.0]).unwrap();
        let grads = net.backward(&[0.3, -0.7]).unwrap();
        assert!(grads.layers[1].weight.iter().all(|&g| g == 0.0));
        assert_eq!(grads.layers[1].bias, vec![0.3, -0.7]);
        assert!(grads.layers[0].weight.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let mut r = rng(7);
        let mut net = Mlp::new(&[3, 5, 2], Activation::Elu, 1.0, &mut r).unwrap();
        let x: Vec<f64> = (0..3).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let u = [0.4, -1.3];
        net.forward_train(&x).unwrap();
        let g1 = net.backward(&u).unwrap();
        net.forward_train(&x).unwrap();
        let g2 = net.backward(&[u[0] * 2.5, u[1] * 2.5]).unwrap();
        for (a, b) in g1.param_slices().iter().zip(g2.param_slices().iter()) {
            for (x1, x2) in a.iter().zip(b.iter()) {
                assert_relative_eq!(x1 * 2.5, x2, max_relative = 1e-12, epsilon = 1e-300);
            }
        }
    }

    /// Central finite differences of `u . f(x)` w.r.t. every parameter.
    fn fd_check(dims: &[usize], act: Activation, seed: u64, tol: f64) {
        let mut r = rng(seed);
        let mut net = Mlp::new(dims, act, 1.0, &mut r).unwrap();
        let x: Vec<f64> = (0..dims[0]).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let u: Vec<f64> = (0..*dims.last().unwrap())
            .map(|_| r.sample::<f64, _>(StandardNormal))
            .collect();
        net.forward_train(&x).unwrap();
        let grads = net.backward(&u).unwrap();

        let h = 1e-5;
        let score = |net: &Mlp, x: &[f64]| -> f64 {
            net.forward(x)
                .unwrap()
                .iter()
                .zip(&u)
                .map(|(o, w)| o * w)
                .sum()
        };
        for k in 0..net.layers.len() {
            for p in 0..net.layers[k].weight.len() {
                let orig = net.layers[k].weight[p];
                net.layers_mut()[k].weight[p] = orig + h;
                let plus = score(&net, &x);
                net.layers_mut()[k].weight[p] = orig - h;
                let minus = score(&net, &x);
                net.layers_mut()[k].weight[p] = orig;
                let fd = (plus - minus) / (2.0 * h);
                let analytic = grads.layers[k].weight[p];
                let denom = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (analytic - fd).abs() / denom < tol,
                    "layer {k} weight {p}: analytic {analytic} vs fd {fd}"
                );
            }
            for p in 0..net.layers[k].bias.len() {
                let orig = net.layers[k].bias[p];
                net.layers_mut()[k].bias[p] = orig + h;
                let plus = score(&net, &x);
                net.layers_mut()[k].bias[p] = orig - h;
                let minus = score(&net, &x);
                net.layers_mut()[k].bias[p] = orig;
                let fd = (plus - minus) / (2.0 * h);
                let analytic = grads.layers[k].bias[p];
                let denom = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (analytic - fd).abs() / denom < tol,
                    "layer {k} bias {p}: analytic {analytic} vs fd {fd}"
                );
            }
        }
        // Input gradient too.
        let mut xv = x.clone();
        for i in 0..xv.len() {
            let orig = xv[i];
            xv[i] = orig + h;
            let plus = score(&net, &xv);
            xv[i] = orig - h;
            let minus = score(&net, &xv);
            xv[i] = orig;
            let fd = (plus - minus) / (2.0 * h);
            let analytic = grads.input[i];
            let denom = analytic.abs().max(fd.abs()).max(1e-6);
            assert!((analytic - fd).abs() / denom < tol, "input {i}");
        }
    }

    #[test]
    fn backward_matches_finite_differences_elu() {
        fd_check(&[4, 6, 5, 2], Activation::Elu, 3, 1e-4);
    }

    #[test]
    fn backward_matches_finite_differences_tanh() {
        fd_check(&[3, 7, 1], Activation::Tanh, 9, 1e-4);
    }

    #[test]
    fn grad_of_input_gradient_matches_finite_differences() {
        // FD of h(theta) = u . grad_x f against the tangent/reverse sweep.
        let mut r = rng(17);
        let net = Mlp::new(&[4, 6, 1], Activation::Elu, 1.0, &mut r).unwrap();
        let x: Vec<f64> = (0..4).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let u: Vec<f64> = (0..4).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let analytic = net.grad_of_input_gradient(&x, &u).unwrap();

        let h = 1e-5;
        let score = |net: &Mlp| -> f64 {
            let (_, g) = net.value_and_input_gradient(&x).unwrap();
            g.iter().zip(&u).map(|(a, b)| a * b).sum()
        };
        let mut net = net;
        for k in 0..net.layers.len() {
            for p in 0..net.layers[k].weight.len() {
                let orig = net.layers[k].weight[p];
                net.layers_mut()[k].weight[p] = orig + h;
                let plus = score(&net);
                net.layers_mut()[k].weight[p] = orig - h;
                let minus = score(&net);
                net.layers_mut()[k].weight[p] = orig;
                let fd = (plus - minus) / (2.0 * h);
                let a = analytic.layers[k].weight[p];
                let denom = a.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (a - fd).abs() / denom < 1e-4,
                    "layer {k} weight {p}: analytic {a} vs fd {fd}"
                );
            }
            for p in 0..net.layers[k].bias.len() {
                let orig = net.layers[k].bias[p];
                net.layers_mut()[k].bias[p] = orig + h;
                let plus = score(&net);
                net.layers_mut()[k].bias[p] = orig - h;
                let minus = score(&net);
                net.layers_mut()[k].bias[p] = orig;
                let fd = (plus - minus) / (2.0 * h);
                let a = analytic.layers[k].bias[p];
                let denom = a.abs().max(fd.abs()).max(1e-6);
                assert!((a - fd).abs() / denom < 1e-4, "layer {k} bias {p}");
            }
        }
    }

    #[test]
    fn deterministic_forward_same_seed() {
        let build = || {
            let mut r = rng(123);
            let net = Mlp::new(&[5, 16, 3], Activation::Elu, 1.0, &mut r).unwrap();
            net.forward(&[0.1, -0.2, 0.3, 0.7, -1.1]).unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn value_and_input_gradient_agrees_with_backward() {
        let mut r = rng(5);
        let mut net = Mlp::new(&[3, 8, 1], Activation::Elu, 1.0, &mut r).unwrap();
        let x = [0.2, -0.9, 1.4];
        let (v, g) = net.value_and_input_gradient(&x).unwrap();
        let out = net.forward_train(&x).unwrap();
        let grads = net.backward(&[1.0]).unwrap();
        assert_eq!(v, out[0]);
        assert_eq!(g, grads.input);
    }
}
