//! Forward dynamics model `p(s' | s, a)` as a diagonal Gaussian over state
//! deltas, trained by maximum likelihood.
//!
//! The network maps `(s, a)` to per-dimension delta means and log-variances
//! (clamped to a configurable range); the predicted next state is
//! `s + μ_Δ`. The augmentor uses the mean-mode prediction distance
//! `‖predict(s, ã) - s̃'‖` to rank synthetic transitions for the λ-filter.
//! One model, no ensemble: the filter needs a consistency distance, not
//! model disagreement.

use crate::data::TransitionDataset;
use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamState, Gradients, Mlp, Workspace};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

pub const DYNAMICS_HIDDEN: usize = 256;
pub const LOG_VAR_BOUNDS: (f64, f64) = (-10.0, 0.5);

#[derive(Debug, Clone)]
pub struct DynamicsModel {
    /// `(s, a) -> [μ_Δ ; log σ²_Δ]`, states normalized, actions raw.
    pub net: Mlp,
    pub state_dim: usize,
    pub action_dim: usize,
    pub log_var_bounds: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictMode {
    Mean,
    Sample,
}

impl DynamicsModel {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hidden: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<Self> {
        let net = Mlp::new(
            &[state_dim + action_dim, hidden, 2 * state_dim],
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        Ok(DynamicsModel {
            net,
            state_dim,
            action_dim,
            log_var_bounds: LOG_VAR_BOUNDS,
        })
    }

    fn clamp_log_var(&self, v: f64) -> f64 {
        v.clamp(self.log_var_bounds.0, self.log_var_bounds.1)
    }

    /// Predicted next state in normalized units. `Mean` returns `s + μ_Δ`;
    /// `Sample` adds `σ_Δ`-scaled Gaussian noise.
    pub fn predict(
        &self,
        state_norm: &[f64],
        action: &[f64],
        mode: PredictMode,
        rng: &mut ChaCha12Rng,
    ) -> Vec<f64> {
        assert_eq!(state_norm.len(), self.state_dim, "dynamics state dim");
        assert_eq!(action.len(), self.action_dim, "dynamics action dim");
        let input = [state_norm, action].concat();
        let out = self.net.forward(&input).expect("dynamics net dim");
        let (mu, log_var) = out.split_at(self.state_dim);
        let mut next = vec![0.0; self.state_dim];
        for i in 0..self.state_dim {
            next[i] = state_norm[i] + mu[i];
            if mode == PredictMode::Sample {
                let sigma = (0.5 * self.clamp_log_var(log_var[i])).exp();
                let e: f64 = rng.sample(StandardNormal);
                next[i] += sigma * e;
            }
        }
        next
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bundle = crate::checkpoint::Bundle::new()
            .with_meta("kind", "dynamics")
            .with_meta("state_dim", self.state_dim)
            .with_meta("action_dim", self.action_dim)
            .with_meta("log_var_min", self.log_var_bounds.0)
            .with_meta("log_var_max", self.log_var_bounds.1)
            .with_net("net", self.net.clone());
        crate::checkpoint::save_bundle(path, &bundle)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bundle = crate::checkpoint::load_bundle(path)?;
        Ok(DynamicsModel {
            state_dim: bundle.meta_parsed("state_dim", path)?,
            action_dim: bundle.meta_parsed("action_dim", path)?,
            log_var_bounds: (
                bundle.meta_parsed("log_var_min", path)?,
                bundle.meta_parsed("log_var_max", path)?,
            ),
            net: bundle.take_net("net", path)?,
        })
    }
}

/// One training item: normalized state, raw action, normalized state delta.
#[derive(Debug, Clone)]
pub struct DynItem {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub delta: Vec<f64>,
}

impl DynItem {
    pub fn from_dataset(dataset: &TransitionDataset, index: usize) -> Self {
        let t = dataset.get(index);
        let s = dataset.normalize_state(&t.state);
        let s2 = dataset.normalize_state(&t.next_state);
        let delta = s2.iter().zip(s.iter()).map(|(b, a)| b - a).collect();
        DynItem {
            state: s,
            action: t.action.clone(),
            delta,
        }
    }
}

/// Mean (over the batch) of the summed per-dimension Gaussian negative
/// log-likelihood `½[(Δ-μ)²/σ² + log σ² + log 2π]`, plus parameter
/// gradients. Log-variances outside the clamp bounds contribute zero
/// gradient through the variance channel.
pub fn nll_loss(model: &DynamicsModel, batch: &[DynItem]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut grads = Gradients::zeros_like(&model.net);
    let mut ws = Workspace::for_model(&model.net);
    let mut input_grad = vec![0.0; model.net.input_dim()];
    let mut out_grad = vec![0.0; model.net.output_dim()];
    let scale = 1.0 / batch.len() as f64;
    let (lo, hi) = model.log_var_bounds;
    let mut loss = 0.0;
    for item in batch {
        let input = [item.state.as_slice(), item.action.as_slice()].concat();
        let out = model.net.forward_into(&input, &mut ws).to_vec();
        let (mu, log_var_raw) = out.split_at(model.state_dim);
        for i in 0..model.state_dim {
            let v = model.clamp_log_var(log_var_raw[i]);
            let inv_var = (-v).exp();
            let diff = item.delta[i] - mu[i];
            loss += 0.5 * (diff * diff * inv_var + v + (2.0 * PI).ln()) * scale;
            // d/dμ = -(Δ-μ)/σ² ; d/dv = ½(1 - (Δ-μ)²/σ²), zero outside clamp
            out_grad[i] = -diff * inv_var * scale;
            out_grad[model.state_dim + i] = if log_var_raw[i] < lo || log_var_raw[i] > hi {
                0.0
            } else {
                0.5 * (1.0 - diff * diff * inv_var) * scale
            };
        }
        model
            .net
            .accumulate_gradients(&input, &mut ws, &out_grad, &mut grads, &mut input_grad);
    }
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite {
            context: "nll_loss",
            detail: format!("loss = {loss}"),
        });
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicsTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for DynamicsTrainConfig {
    fn default() -> Self {
        DynamicsTrainConfig {
            steps: 4000,
            batch_size: 128,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicsTrainReport {
    pub loss_trace: Vec<f64>,
}

pub fn train_dynamics(
    model: &mut DynamicsModel,
    dataset: &TransitionDataset,
    cfg: &DynamicsTrainConfig,
    rng: &mut ChaCha12Rng,
) -> Result<DynamicsTrainReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut adam = AdamState::new(&model.net, cfg.learning_rate);
    let mut loss_trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let idx = dataset.sample_indices(cfg.batch_size, rng)?;
        let batch: Vec<DynItem> = idx
            .into_iter()
            .map(|i| DynItem::from_dataset(dataset, i))
            .collect();
        let (loss, grads) = nll_loss(model, &batch)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                step,
                detail: format!("dynamics loss {loss}"),
            });
        }
        adam_step(&mut model.net, &grads, &mut adam)?;
        loss_trace.push(loss);
    }
    Ok(DynamicsTrainReport { loss_trace })
}
