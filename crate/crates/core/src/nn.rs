//! Minimal feed-forward network with analytic backpropagation and an
//! adaptive-moment optimizer, enough for small actor/critic heads.
//!
//! Layers are affine with tanh on every hidden layer and a raw affine output.
//! Gradients are exact; the finite-difference tests pin them down.

use crate::error::{Error, Result};
use crate::num::Real;
use rand::Rng;

/// Fully connected network; `widths` runs input to output.
#[derive(Debug, Clone)]
pub struct Mlp<T> {
    pub widths: Vec<usize>,
    /// Row-major `out x in` weight matrix per layer.
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

/// Per-layer activations kept by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// `act[0]` is the input; `act[l]` the post-activation of layer `l`
    /// (the raw affine output for the last layer).
    pub act: Vec<Vec<T>>,
}

/// Parameter-shaped gradient container.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| vec![T::zero(); w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }

    /// `self += other * scale`.
    pub fn add_scaled(&mut self, other: &Gradients<T>, scale: T) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y * scale;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y * scale;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for w in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in w.iter_mut() {
                *x = *x * s;
            }
        }
    }
}

impl<T: Real> Mlp<T> {
    /// Random init: uniform scaled by the inverse square root of fan-in; the
    /// final layer additionally scaled by `final_scale` (use a small value
    /// for near-uniform initial policies).
    pub fn new<R: Rng>(widths: &[usize], rng: &mut R, final_scale: T) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument(
                "need >= 2 nonzero layer widths".into(),
            ));
        }
        let last = widths.len() - 2;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, pair) in widths.windows(2).enumerate() {
            let (n_in, n_out) = (pair[0], pair[1]);
            let bound = T::one() / T::lit(n_in as f64).sqrt();
            let extra = if l == last { final_scale } else { T::one() };
            let w = (0..n_out * n_in)
                .map(|_| (T::uniform01(rng) + T::uniform01(rng) - T::one()) * bound * extra)
                .collect();
            weights.push(w);
            biases.push(vec![T::zero(); n_out]);
        }
        Ok(Mlp {
            widths: widths.to_vec(),
            weights,
            biases,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Evaluate the network, returning the output and the activation cache.
    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, ForwardCache<T>)> {
        if x.len() != self.widths[0] {
            return Err(Error::ShapeMismatch(format!(
                "input width {} vs {}",
                x.len(),
                self.widths[0]
            )));
        }
        let mut act = vec![x.to_vec()];
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let prev = &act[l];
            let mut z = self.biases[l].clone();
            for i in 0..n_out {
                let row = &self.weights[l][i * n_in..(i + 1) * n_in];
                for (w, &p) in row.iter().zip(prev.iter()) {
                    z[i] += *w * p;
                }
            }
            if l + 1 < self.widths.len() - 1 {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
            }
            act.push(z);
        }
        let out = act.last().unwrap().clone();
        Ok((out, ForwardCache { act }))
    }

    /// Exact gradients of `output . upstream` w.r.t. all parameters.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &[T]) -> Result<Gradients<T>> {
        let layers = self.num_layers();
        if cache.act.len() != layers + 1 {
            return Err(Error::ShapeMismatch("forward cache".into()));
        }
        if upstream.len() != *self.widths.last().unwrap() {
            return Err(Error::ShapeMismatch("upstream gradient width".into()));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = upstream.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let prev = &cache.act[l];
            for i in 0..n_out {
                grads.biases[l][i] = delta[i];
                for j in 0..n_in {
                    grads.weights[l][i * n_in + j] = delta[i] * prev[j];
                }
            }
            if l > 0 {
                // propagate through W^T and the tanh of the previous layer
                let mut next = vec![T::zero(); n_in];
                for i in 0..n_out {
                    let row = &self.weights[l][i * n_in..(i + 1) * n_in];
                    for (nj, &w) in next.iter_mut().zip(row.iter()) {
                        *nj += w * delta[i];
                    }
                }
                for (nj, &a) in next.iter_mut().zip(cache.act[l].iter()) {
                    *nj = *nj * (T::one() - a * a);
                }
                delta = next;
            }
        }
        Ok(grads)
    }

    /// Flat parameter vector (weights then biases, layer order).
    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for l in 0..self.num_layers() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    /// Load parameters written by [`Mlp::params_flat`].
    pub fn set_params(&mut self, flat: &[T]) -> Result<()> {
        let need: usize = self
            .weights
            .iter()
            .map(|w| w.len())
            .chain(self.biases.iter().map(|b| b.len()))
            .sum();
        if flat.len() != need {
            return Err(Error::ShapeMismatch(format!(
                "flat params {} vs {}",
                flat.len(),
                need
            )));
        }
        let mut k = 0;
        for l in 0..self.num_layers() {
            let wn = self.weights[l].len();
            self.weights[l].copy_from_slice(&flat[k..k + wn]);
            k += wn;
            let bn = self.biases[l].len();
            self.biases[l].copy_from_slice(&flat[k..k + bn]);
            k += bn;
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer state (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
#[derive(Debug, Clone)]
pub struct OptState<T> {
    pub lr: T,
    pub step: usize,
    m: Gradients<T>,
    v: Gradients<T>,
}

impl<T: Real> OptState<T> {
    pub fn new(net: &Mlp<T>, lr: T) -> Self {
        OptState {
            lr,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }
}

/// One optimizer step; `maximize` flips the update direction (ascent).
pub fn opt_step<T: Real>(
    net: &mut Mlp<T>,
    opt: &mut OptState<T>,
    grads: &Gradients<T>,
    maximize: bool,
) {
    let b1 = T::lit(0.9);
    let b2 = T::lit(0.999);
    let eps = T::lit(1e-8);
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let sign = if maximize { T::one() } else { -T::one() };
    for l in 0..net.num_layers() {
        for (params, g, m, v) in [
            (
                &mut net.weights[l],
                &grads.weights[l],
                &mut opt.m.weights[l],
                &mut opt.v.weights[l],
            ),
            (
                &mut net.biases[l],
                &grads.biases[l],
                &mut opt.m.biases[l],
                &mut opt.v.biases[l],
            ),
        ] {
            for k in 0..params.len() {
                m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                params[k] += sign * opt.lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
