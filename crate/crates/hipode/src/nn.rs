//! Minimal deterministic feed-forward network substrate.
//!
//! Everything learned in this crate — the three conditional VAEs, the
//! pessimistic value function, the forward dynamics model and the TD3+BC
//! actor/critics — is built from the same plain [`Mlp`]: dense layers,
//! analytic backprop, bias-corrected Adam. All arithmetic is `f64` so
//! gradients can be checked against central finite differences tightly,
//! and forward passes are bit-reproducible for a fixed model and input.
//!
//! There is no autodiff graph here. Callers compute the gradient of their
//! loss with respect to the network output and hand it to
//! [`Mlp::accumulate_gradients`]; chain rules through multiple networks
//! (reparameterized latents, critic-through-actor) are composed by hand in
//! the owning module.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Elementwise activation. `Relu` and `Tanh` serve as hidden-layer
/// activations, `Identity` and `Tanh` as output activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed in terms of the activation's output value.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

/// Dense feed-forward network.
///
/// `layer_dims = [d0, d1, ..., dk]` describes k layers; layer `l` maps a
/// `d_l` vector to a `d_{l+1}` vector through a row-major weight matrix
/// (`d_{l+1} x d_l`) and a bias. Hidden layers use `hidden_activation`,
/// the final layer `output_activation`.
#[derive(Debug, Clone)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    /// weights[l][j * in + i]: input i -> output j of layer l.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Per-layer activations plus delta scratch, reused across forward/backward
/// calls to keep the training hot path allocation-free.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta_a: Vec<f64>,
    delta_b: Vec<f64>,
}

impl Workspace {
    pub fn for_model(model: &Mlp) -> Self {
        let acts = model.layer_dims[1..]
            .iter()
            .map(|&d| vec![0.0; d])
            .collect::<Vec<_>>();
        let widest = model.layer_dims.iter().copied().max().unwrap_or(0);
        Workspace {
            acts,
            delta_a: vec![0.0; widest],
            delta_b: vec![0.0; widest],
        }
    }

    /// Output of the most recent forward pass.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("workspace for empty model")
    }
}

/// Parameter gradients, shaped exactly like the model's parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Gradients {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|x| *x = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|x| *x *= factor);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }
}

impl Mlp {
    /// Build a network with seeded uniform init in ±1/sqrt(fan_in).
    pub fn new(
        layer_dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for l in 0..layer_dims.len() - 1 {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let b: Vec<f64> = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            weights.push(w);
            biases.push(b);
        }
        Ok(Mlp {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            hidden_activation,
            output_activation,
        })
    }

    /// All-zero parameters; mostly useful in tests and as a blank slate.
    pub fn zeros(
        layer_dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        let weights = (0..layer_dims.len() - 1)
            .map(|l| vec![0.0; layer_dims[l] * layer_dims[l + 1]])
            .collect();
        let biases = (0..layer_dims.len() - 1)
            .map(|l| vec![0.0; layer_dims[l + 1]])
            .collect();
        Ok(Mlp {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            hidden_activation,
            output_activation,
        })
    }

    fn validate_dims(layer_dims: &[usize]) -> Result<()> {
        if layer_dims.len() < 2 {
            return Err(Error::invalid("network needs at least one layer"));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Direct access for instrumented tests (e.g. constructing a network
    /// whose output is a known affine transform of another's).
    pub fn weights_mut(&mut self) -> (&mut Vec<Vec<f64>>, &mut Vec<Vec<f64>>) {
        (&mut self.weights, &mut self.biases)
    }

    /// Weights and biases of layer `l` (row-major, `out x in`).
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        (&self.weights[l], &self.biases[l])
    }

    pub fn params_are_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Flatten all parameters (layer by layer, weights then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.weights.len() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimMismatch {
                context: "set_flat_params",
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        let mut off = 0;
        for l in 0..self.weights.len() {
            let wl = self.weights[l].len();
            self.weights[l].copy_from_slice(&params[off..off + wl]);
            off += wl;
            let bl = self.biases[l].len();
            self.biases[l].copy_from_slice(&params[off..off + bl]);
            off += bl;
        }
        Ok(())
    }

    /// Shape-checked forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                context: "forward input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let mut ws = Workspace::for_model(self);
        self.forward_into(input, &mut ws);
        Ok(ws.output().to_vec())
    }

    /// Forward pass into a reusable workspace. Panics on shape misuse —
    /// this is the hot path; validate at the boundary instead.
    pub fn forward_into<'a>(&self, input: &[f64], ws: &'a mut Workspace) -> &'a [f64] {
        assert_eq!(input.len(), self.input_dim(), "forward_into: input dim");
        let n_layers = self.weights.len();
        for l in 0..n_layers {
            let in_dim = self.layer_dims[l];
            let act = if l + 1 == n_layers {
                self.output_activation
            } else {
                self.hidden_activation
            };
            // Split so we can read acts[l-1] while writing acts[l].
            let (prev_slice, cur_slice) = ws.acts.split_at_mut(l);
            let src: &[f64] = if l == 0 { input } else { &prev_slice[l - 1] };
            let dst = &mut cur_slice[0];
            let w = &self.weights[l];
            let b = &self.biases[l];
            for (j, out) in dst.iter_mut().enumerate() {
                let row = &w[j * in_dim..(j + 1) * in_dim];
                let mut z = b[j];
                for (wi, xi) in row.iter().zip(src.iter()) {
                    z += wi * xi;
                }
                *out = act.apply(z);
            }
        }
        ws.output()
    }

    /// Backprop `output_grad` through the network, **adding** parameter
    /// gradients into `grads` and writing the loss gradient with respect to
    /// the input into `input_grad`. Requires `ws` to hold the activations
    /// of `forward_into(input, ws)`.
    pub fn accumulate_gradients(
        &self,
        input: &[f64],
        ws: &mut Workspace,
        output_grad: &[f64],
        grads: &mut Gradients,
        input_grad: &mut [f64],
    ) {
        self.backprop(input, ws, output_grad, Some(grads), input_grad);
    }

    /// Gradient with respect to the input only; parameters untouched.
    /// Used where a frozen network sits in the middle of a chain (e.g. the
    /// actor objective differentiates the critic's action input).
    pub fn input_gradient(
        &self,
        input: &[f64],
        ws: &mut Workspace,
        output_grad: &[f64],
        input_grad: &mut [f64],
    ) {
        self.backprop(input, ws, output_grad, None, input_grad);
    }

    fn backprop(
        &self,
        input: &[f64],
        ws: &mut Workspace,
        output_grad: &[f64],
        mut grads: Option<&mut Gradients>,
        input_grad: &mut [f64],
    ) {
        let n_layers = self.weights.len();
        assert_eq!(output_grad.len(), self.output_dim(), "backprop: output grad dim");
        assert_eq!(input.len(), self.input_dim(), "backprop: input dim");
        assert_eq!(input_grad.len(), self.input_dim(), "backprop: input grad dim");

        let Workspace { acts, delta_a, delta_b } = ws;

        // delta of the last layer: dL/dz = dL/dy * act'(z)
        {
            let act = self.output_activation;
            let last = &acts[n_layers - 1];
            for j in 0..last.len() {
                delta_a[j] = output_grad[j] * act.derivative_from_output(last[j]);
            }
        }

        for l in (0..n_layers).rev() {
            let in_dim = self.layer_dims[l];
            let out_dim = self.layer_dims[l + 1];
            let src: &[f64] = if l == 0 { input } else { &acts[l - 1] };
            let w = &self.weights[l];

            if let Some(g) = grads.as_deref_mut() {
                let gw = &mut g.weights[l];
                let gb = &mut g.biases[l];
                for j in 0..out_dim {
                    let d = delta_a[j];
                    if d != 0.0 {
                        let row = &mut gw[j * in_dim..(j + 1) * in_dim];
                        for (gi, xi) in row.iter_mut().zip(src.iter()) {
                            *gi += d * xi;
                        }
                    }
                    gb[j] += d;
                }
            }

            // dL/d src_i = sum_j w[j,i] * delta_j
            {
                let dst: &mut [f64] = if l == 0 {
                    input_grad
                } else {
                    &mut delta_b[..in_dim]
                };
                dst.iter_mut().for_each(|x| *x = 0.0);
                for j in 0..out_dim {
                    let d = delta_a[j];
                    if d != 0.0 {
                        let row = &w[j * in_dim..(j + 1) * in_dim];
                        for (di, wi) in dst.iter_mut().zip(row.iter()) {
                            *di += wi * d;
                        }
                    }
                }
            }

            if l > 0 {
                let act = self.hidden_activation;
                let prev = &acts[l - 1];
                for i in 0..in_dim {
                    delta_a[i] = delta_b[i] * act.derivative_from_output(prev[i]);
                }
            }
        }
    }

    /// One-shot backward: runs its own forward pass and returns fresh
    /// parameter gradients plus the input gradient. Fails fast if anything
    /// non-finite appears.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        if input.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                context: "backward input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::DimMismatch {
                context: "backward output_grad",
                expected: self.output_dim(),
                actual: output_grad.len(),
            });
        }
        let mut ws = Workspace::for_model(self);
        self.forward_into(input, &mut ws);
        let mut grads = Gradients::zeros_like(self);
        let mut input_grad = vec![0.0; self.input_dim()];
        self.accumulate_gradients(input, &mut ws, output_grad, &mut grads, &mut input_grad);
        if !grads.is_finite() || input_grad.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "backward",
                detail: format!(
                    "non-finite gradient (input finite: {}, output_grad finite: {})",
                    input.iter().all(|x| x.is_finite()),
                    output_grad.iter().all(|x| x.is_finite()),
                ),
            });
        }
        Ok((grads, input_grad))
    }
}

/// Soft-blend `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    assert_eq!(target.layer_dims, online.layer_dims, "soft_update: shape mismatch");
    for (tw, ow) in target.weights.iter_mut().zip(online.weights.iter()) {
        for (t, o) in tw.iter_mut().zip(ow.iter()) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
    for (tb, ob) in target.biases.iter_mut().zip(online.biases.iter()) {
        for (t, o) in tb.iter_mut().zip(ob.iter()) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
}

/// Bias-corrected Adam, moments shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment_w: Vec<Vec<f64>>,
    second_moment_w: Vec<Vec<f64>>,
    first_moment_b: Vec<Vec<f64>>,
    second_moment_b: Vec<Vec<f64>>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(model: &Mlp, learning_rate: f64) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        AdamState {
            first_moment_w: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            second_moment_w: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            first_moment_b: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            second_moment_b: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Apply one Adam update. Parameters are checked to stay finite.
pub fn adam_step(model: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            context: "adam_step",
            detail: "gradients contain NaN/Inf".into(),
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let lr = state.learning_rate;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);

    let update = |param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..param.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };

    for l in 0..model.weights.len() {
        update(
            &mut model.weights[l],
            &grads.weights[l],
            &mut state.first_moment_w[l],
            &mut state.second_moment_w[l],
        );
        update(
            &mut model.biases[l],
            &grads.biases[l],
            &mut state.first_moment_b[l],
            &mut state.second_moment_b[l],
        );
    }

    if !model.params_are_finite() {
        return Err(Error::NonFinite {
            context: "adam_step",
            detail: format!("parameters non-finite after step {}", state.step_count),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::testutil::{finite_diff_check, loop_forward_oracle};

    #[test]
    fn zero_net_maps_anything_to_zero() {
        let net = Mlp::zeros(&[3, 4, 2], Activation::Relu, Activation::Identity).unwrap();
        let out = net.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let mut net = Mlp::zeros(&[3, 3], Activation::Relu, Activation::Identity).unwrap();
        {
            let (w, _) = net.weights_mut();
            for i in 0..3 {
                w[0][i * 3 + i] = 1.0;
            }
        }
        let x = [0.3, -1.7, 2.2];
        let out = net.forward(&x).unwrap();
        assert_eq!(out, x.to_vec());
    }

    #[test]
    fn forward_matches_loop_oracle_on_random_net() {
        let mut rng = substream(11, "nn.test.forward");
        let net = Mlp::new(&[3, 4, 2], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let x = [0.4, -0.9, 1.3];
        let got = net.forward(&x).unwrap();
        let want = loop_forward_oracle(&net, &x);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-14, "forward {g} vs oracle {w}");
        }
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let net = Mlp::zeros(&[3, 2], Activation::Relu, Activation::Identity).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut rng = substream(12, "nn.test.zero-grad");
        let net = Mlp::new(&[3, 5, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let (grads, input_grad) = net.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert_eq!(grads.max_abs(), 0.0);
        assert!(input_grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_layer_weight_grad_is_input() {
        // Single linear layer, loss = output[0]: dL/dw_0i = input_i.
        let net = Mlp::zeros(&[3, 1], Activation::Relu, Activation::Identity).unwrap();
        let x = [0.5, -1.5, 2.0];
        let (grads, input_grad) = net.backward(&x, &[1.0]).unwrap();
        assert_eq!(grads.weights[0], x.to_vec());
        assert_eq!(grads.biases[0], vec![1.0]);
        // zero weights: input grad is zero
        assert!(input_grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences_on_100_random_nets() {
        let mut rng = substream(13, "nn.test.fdcheck");
        let mut worst = 0.0_f64;
        for case in 0..100 {
            let dims = crate::testutil::random_small_dims(&mut rng);
            let hidden = if case % 2 == 0 { Activation::Relu } else { Activation::Tanh };
            let net = Mlp::new(&dims, hidden, Activation::Identity, &mut rng).unwrap();
            let input: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let out_grad: Vec<f64> = (0..*dims.last().unwrap())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let err = finite_diff_check(&net, &input, &out_grad);
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn input_gradient_matches_full_backward() {
        let mut rng = substream(14, "nn.test.input-grad");
        let net = Mlp::new(&[4, 6, 3], Activation::Relu, Activation::Tanh, &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let og = [0.3, -0.2, 0.9];
        let (_, want) = net.backward(&x, &og).unwrap();
        let mut ws = Workspace::for_model(&net);
        net.forward_into(&x, &mut ws);
        let mut got = vec![0.0; 4];
        net.input_gradient(&x, &mut ws, &og, &mut got);
        assert_eq!(got, want);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut net = Mlp::zeros(&[2, 2], Activation::Relu, Activation::Identity).unwrap();
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0].iter_mut().for_each(|g| *g = 1.0);
        grads.biases[0].iter_mut().for_each(|g| *g = 1.0);
        let mut state = AdamState::new(&net, 1e-3);
        adam_step(&mut net, &grads, &mut state).unwrap();
        // m_hat = 1, v_hat = 1 => step = lr / (1 + eps)
        let expected = -1e-3 / (1.0 + 1e-8);
        for p in net.flat_params() {
            assert!((p - expected).abs() < 1e-12, "param {p} vs {expected}");
        }
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut rng = substream(15, "nn.test.adam-zero");
        let mut net = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let before = net.flat_params();
        let grads = Gradients::zeros_like(&net);
        let mut state = AdamState::new(&net, 1e-3);
        adam_step(&mut net, &grads, &mut state).unwrap();
        assert_eq!(net.flat_params(), before);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn adam_two_steps_match_scalar_oracle() {
        // Independent scalar recomputation of two Adam updates with g = 0.7.
        let g = 0.7;
        let (lr, b1, b2, eps) = (1e-3, 0.9, 0.999, 1e-8);
        let mut m = 0.0;
        let mut v = 0.0;
        let mut p_oracle = 0.25;
        let mut disp = Vec::new();
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - f64::powi(b1, t));
            let v_hat = v / (1.0 - f64::powi(b2, t));
            let step = lr * m_hat / (v_hat.sqrt() + eps);
            disp.push(step);
            p_oracle -= step;
        }

        let mut net = Mlp::zeros(&[1, 1], Activation::Relu, Activation::Identity).unwrap();
        net.set_flat_params(&[0.25, 0.0]).unwrap();
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0][0] = g;
        let mut state = AdamState::new(&net, lr);
        let p0 = net.flat_params()[0];
        adam_step(&mut net, &grads, &mut state).unwrap();
        let p1 = net.flat_params()[0];
        adam_step(&mut net, &grads, &mut state).unwrap();
        let p2 = net.flat_params()[0];

        assert!((p2 - p_oracle).abs() < 1e-15);
        // moment accumulation: second displacement cannot exceed the first
        assert!((p1 - p2).abs() <= (p0 - p1).abs() + 1e-12);
        assert!((p1 - p2).abs() > 0.0);
        assert!(disp[1] <= disp[0] + 1e-12);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut net = Mlp::zeros(&[1, 1], Activation::Relu, Activation::Identity).unwrap();
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0][0] = f64::NAN;
        let mut state = AdamState::new(&net, 1e-3);
        assert!(matches!(
            adam_step(&mut net, &grads, &mut state),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn forward_is_deterministic_for_fixed_seed() {
        let build = || {
            let mut rng = substream(99, "nn.test.determinism");
            Mlp::new(&[4, 8, 3], Activation::Relu, Activation::Tanh, &mut rng).unwrap()
        };
        let (a, b) = (build(), build());
        let x = [0.1, 0.2, 0.3, 0.4];
        let ya = a.forward(&x).unwrap();
        let yb = b.forward(&x).unwrap();
        assert_eq!(ya, yb);
        let bits_a: Vec<u64> = ya.iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = yb.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }

    #[test]
    fn soft_update_blends_parameters() {
        let mut target = Mlp::zeros(&[1, 1], Activation::Relu, Activation::Identity).unwrap();
        let mut online = Mlp::zeros(&[1, 1], Activation::Relu, Activation::Identity).unwrap();
        target.set_flat_params(&[1.0, 2.0]).unwrap();
        online.set_flat_params(&[3.0, 4.0]).unwrap();
        soft_update(&mut target, &online, 0.25);
        let p = target.flat_params();
        assert!((p[0] - 1.5).abs() < 1e-15);
        assert!((p[1] - 2.5).abs() < 1e-15);
    }
}
