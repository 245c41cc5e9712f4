//! Pessimistic state-value learning with negative sampling.
//!
//! The value net is trained on two regression targets at once:
//!
//! * **TD** — for dataset states, `V(s)` regresses onto
//!   `r + γ (1 - done) V̄(s')` with a frozen target network `V̄`;
//! * **negative sampling** — for Gaussian perturbations `s + δ` of dataset
//!   states, the same bootstrap target is *reduced* by `α ‖δ‖`, so value
//!   estimates fall off with distance from the data.
//!
//! The combined objective makes the argmax over generated candidate next
//! states prefer states that are both near the data and genuinely valuable.
//! Perturbations are drawn in normalized state space, which keeps the
//! penalty scope `σ` dimensionless.

use crate::data::TransitionDataset;
use crate::error::{Error, Result};
use crate::nn::{adam_step, soft_update, Activation, AdamState, Gradients, Mlp, Workspace};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const VALUE_HIDDEN: usize = 256;

/// Online and target value networks plus the discount.
#[derive(Debug, Clone)]
pub struct ValueModel {
    pub online: Mlp,
    pub target: Mlp,
    pub discount: f64,
}

impl ValueModel {
    pub fn new(state_dim: usize, hidden: usize, discount: f64, rng: &mut ChaCha12Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::invalid("discount must be in (0, 1)"));
        }
        let online = Mlp::new(
            &[state_dim, hidden, 1],
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        let target = online.clone();
        Ok(ValueModel { online, target, discount })
    }

    /// V_θ of a normalized state.
    pub fn value(&self, state_norm: &[f64]) -> f64 {
        self.online.forward(state_norm).expect("value net dim")[0]
    }

    /// V_θ̄ of a normalized state.
    pub fn target_value(&self, state_norm: &[f64]) -> f64 {
        self.target.forward(state_norm).expect("target net dim")[0]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bundle = crate::checkpoint::Bundle::new()
            .with_meta("kind", "value")
            .with_meta("discount", self.discount)
            .with_net("online", self.online.clone())
            .with_net("target", self.target.clone());
        crate::checkpoint::save_bundle(path, &bundle)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bundle = crate::checkpoint::load_bundle(path)?;
        let discount = bundle.meta_parsed("discount", path)?;
        let online = bundle.take_net("online", path)?;
        let target = bundle.take_net("target", path)?;
        Ok(ValueModel { online, target, discount })
    }
}

/// Negative-sampling knobs. `penalty_weight` is usually non-negative; the
/// sweep interface deliberately admits negative values so the ablation
/// grid {-1, 0, 1, 2, 4, 8} can run unchanged.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NsConfig {
    pub penalty_weight: f64,
    pub penalty_scope: f64,
    pub noisy_samples_per_state: usize,
    pub target_update_period: usize,
    pub tau: f64,
}

impl Default for NsConfig {
    fn default() -> Self {
        NsConfig {
            penalty_weight: 1.0,
            penalty_scope: 1.0,
            noisy_samples_per_state: 1,
            target_update_period: 2,
            tau: 0.005,
        }
    }
}

impl NsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.penalty_scope <= 0.0 {
            return Err(Error::invalid("penalty_scope must be positive"));
        }
        if !self.penalty_weight.is_finite() {
            return Err(Error::invalid("penalty_weight must be finite"));
        }
        if self.noisy_samples_per_state == 0 {
            return Err(Error::invalid("noisy_samples_per_state must be >= 1"));
        }
        if self.target_update_period == 0 {
            return Err(Error::invalid("target_update_period must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.tau) || self.tau == 0.0 {
            return Err(Error::invalid("tau must be in (0, 1]"));
        }
        Ok(())
    }
}

/// One TD regression item in normalized state units.
#[derive(Debug, Clone)]
pub struct TdItem {
    pub state: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

impl TdItem {
    pub fn from_dataset(dataset: &TransitionDataset, index: usize) -> Self {
        let t = dataset.get(index);
        TdItem {
            state: dataset.normalize_state(&t.state),
            reward: t.reward,
            next_state: dataset.normalize_state(&t.next_state),
            done: t.done,
        }
    }
}

/// Mean squared TD error `[r + γ(1-done) V̄(s') - V(s)]²` and its gradient
/// with respect to the online parameters. The target network is treated as
/// a constant.
pub fn td_loss(model: &ValueModel, batch: &[TdItem]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut grads = Gradients::zeros_like(&model.online);
    let mut ws = Workspace::for_model(&model.online);
    let mut tws = Workspace::for_model(&model.target);
    let mut input_grad = vec![0.0; model.online.input_dim()];
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for item in batch {
        let bootstrap = if item.done {
            0.0
        } else {
            model.target.forward_into(&item.next_state, &mut tws)[0]
        };
        let target = item.reward + model.discount * bootstrap;
        let v = model.online.forward_into(&item.state, &mut ws)[0];
        let err = v - target;
        loss += err * err * scale;
        // d err^2 / d v = 2 err
        model.online.accumulate_gradients(
            &item.state,
            &mut ws,
            &[2.0 * err * scale],
            &mut grads,
            &mut input_grad,
        );
    }
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite {
            context: "td_loss",
            detail: format!("loss = {loss}"),
        });
    }
    Ok((loss, grads))
}

/// Negative-sampling loss with caller-supplied perturbations: `deltas`
/// holds `noisy_samples_per_state` normalized-space offsets per batch item,
/// flattened item-major. Deterministic, so gradients are finite-difference
/// checkable.
pub fn ns_loss_with_deltas(
    model: &ValueModel,
    batch: &[TdItem],
    deltas: &[Vec<f64>],
    cfg: &NsConfig,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let per = cfg.noisy_samples_per_state;
    if deltas.len() != batch.len() * per {
        return Err(Error::DimMismatch {
            context: "ns_loss deltas",
            expected: batch.len() * per,
            actual: deltas.len(),
        });
    }
    let mut grads = Gradients::zeros_like(&model.online);
    let mut ws = Workspace::for_model(&model.online);
    let mut tws = Workspace::for_model(&model.target);
    let mut input_grad = vec![0.0; model.online.input_dim()];
    let scale = 1.0 / (batch.len() * per) as f64;
    let mut loss = 0.0;
    let mut noisy = vec![0.0; model.online.input_dim()];
    for (i, item) in batch.iter().enumerate() {
        let bootstrap = if item.done {
            0.0
        } else {
            model.target.forward_into(&item.next_state, &mut tws)[0]
        };
        let td_target = item.reward + model.discount * bootstrap;
        for k in 0..per {
            let delta = &deltas[i * per + k];
            let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            let target = td_target - cfg.penalty_weight * norm;
            for (n, (s, d)) in noisy.iter_mut().zip(item.state.iter().zip(delta.iter())) {
                *n = s + d;
            }
            let v = model.online.forward_into(&noisy, &mut ws)[0];
            let err = v - target;
            loss += err * err * scale;
            model.online.accumulate_gradients(
                &noisy,
                &mut ws,
                &[2.0 * err * scale],
                &mut grads,
                &mut input_grad,
            );
        }
    }
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite {
            context: "ns_loss",
            detail: format!("loss = {loss}"),
        });
    }
    Ok((loss, grads))
}

/// Negative-sampling loss with perturbations drawn `δ ~ N(0, σ² I)`.
pub fn ns_loss(
    model: &ValueModel,
    batch: &[TdItem],
    cfg: &NsConfig,
    rng: &mut ChaCha12Rng,
) -> Result<(f64, Gradients)> {
    let state_dim = model.online.input_dim();
    let deltas: Vec<Vec<f64>> = (0..batch.len() * cfg.noisy_samples_per_state)
        .map(|_| {
            (0..state_dim)
                .map(|_| {
                    let e: f64 = rng.sample(StandardNormal);
                    cfg.penalty_scope * e
                })
                .collect()
        })
        .collect();
    ns_loss_with_deltas(model, batch, &deltas, cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for ValueTrainConfig {
    fn default() -> Self {
        ValueTrainConfig {
            steps: 6000,
            batch_size: 128,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueTrainReport {
    pub loss_trace: Vec<f64>,
}

/// Minimize `L_td + L_ns` over the dataset with soft target updates every
/// `target_update_period` steps.
pub fn train_value(
    model: &mut ValueModel,
    dataset: &TransitionDataset,
    ns_cfg: &NsConfig,
    train_cfg: &ValueTrainConfig,
    rng: &mut ChaCha12Rng,
) -> Result<ValueTrainReport> {
    ns_cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut adam = AdamState::new(&model.online, train_cfg.learning_rate);
    let mut loss_trace = Vec::with_capacity(train_cfg.steps);
    for step in 0..train_cfg.steps {
        let idx = dataset.sample_indices(train_cfg.batch_size, rng)?;
        let batch: Vec<TdItem> = idx
            .into_iter()
            .map(|i| TdItem::from_dataset(dataset, i))
            .collect();
        let (td, mut grads) = td_loss(model, &batch)?;
        let (ns, ns_grads) = ns_loss(model, &batch, ns_cfg, rng)?;
        for l in 0..grads.weights.len() {
            for (g, n) in grads.weights[l].iter_mut().zip(ns_grads.weights[l].iter()) {
                *g += n;
            }
            for (g, n) in grads.biases[l].iter_mut().zip(ns_grads.biases[l].iter()) {
                *g += n;
            }
        }
        let loss = td + ns;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                step,
                detail: format!("value loss {loss}"),
            });
        }
        adam_step(&mut model.online, &grads, &mut adam)?;
        if (step + 1) % ns_cfg.target_update_period == 0 {
            soft_update(&mut model.target, &model.online, ns_cfg.tau);
        }
        loss_trace.push(loss);
    }
    Ok(ValueTrainReport { loss_trace })
}

/// Argmax of V_θ over candidate states (normalized units); ties resolve to
/// the lowest index. Returns the winning index and a copy of the state.
pub fn select_best(model: &ValueModel, candidates: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::invalid("select_best: no candidates"));
    }
    let mut ws = Workspace::for_model(&model.online);
    let mut best_idx = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let v = model.online.forward_into(c, &mut ws)[0];
        if v > best_val {
            best_val = v;
            best_idx = i;
        }
    }
    Ok((best_idx, candidates[best_idx].clone()))
}
