//! Conditional variational autoencoders.
//!
//! One generic encoder/decoder pair trained with reconstruction-plus-KL,
//! instantiated in three roles:
//!
//! * **state transition** — decode a next state from `(z, s)`,
//! * **inverse action** — decode the action that connects `(s, s')`,
//! * **reward** — decode the scalar reward for `(s, s')`.
//!
//! The encoder maps `(target, condition)` to the mean and log-std of a
//! diagonal Gaussian over the latent; training samples the latent with the
//! reparameterization trick so the whole loss has analytic gradients. At
//! generation time latents are drawn from the standard normal and clipped,
//! which suppresses low-density samples.
//!
//! All state inputs are expected in normalized units; actions and rewards
//! are raw. Action decoding uses a tanh output layer so generated actions
//! are bounded.

use crate::data::TransitionDataset;
use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamState, Gradients, Mlp, Workspace};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvaeRole {
    StateTransition,
    InverseAction,
    Reward,
}

impl CvaeRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            CvaeRole::StateTransition => "state_transition",
            CvaeRole::InverseAction => "inverse_action",
            CvaeRole::Reward => "reward",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "state_transition" => Ok(CvaeRole::StateTransition),
            "inverse_action" => Ok(CvaeRole::InverseAction),
            "reward" => Ok(CvaeRole::Reward),
            other => Err(Error::invalid(format!("unknown cvae role `{other}`"))),
        }
    }
}

pub const CVAE_HIDDEN: usize = 750;

#[derive(Debug, Clone)]
pub struct CvaeModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub latent_dim: usize,
    pub target_dim: usize,
    pub condition_dim: usize,
    pub role: CvaeRole,
}

impl CvaeModel {
    /// Build a CVAE for `role` on an environment with the given state and
    /// action dimensions. The latent dimension is twice the state
    /// dimension; encoder and decoder each have one hidden layer.
    pub fn new(
        role: CvaeRole,
        state_dim: usize,
        action_dim: usize,
        hidden: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<Self> {
        let latent_dim = 2 * state_dim;
        let (target_dim, condition_dim, out_activation) = match role {
            CvaeRole::StateTransition => (state_dim, state_dim, Activation::Identity),
            CvaeRole::InverseAction => (action_dim, 2 * state_dim, Activation::Tanh),
            CvaeRole::Reward => (1, 2 * state_dim, Activation::Identity),
        };
        let encoder = Mlp::new(
            &[target_dim + condition_dim, hidden, 2 * latent_dim],
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        let decoder = Mlp::new(
            &[latent_dim + condition_dim, hidden, target_dim],
            Activation::Relu,
            out_activation,
            rng,
        )?;
        Ok(CvaeModel {
            encoder,
            decoder,
            latent_dim,
            target_dim,
            condition_dim,
            role,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bundle = crate::checkpoint::Bundle::new()
            .with_meta("kind", "cvae")
            .with_meta("role", self.role.as_str())
            .with_meta("latent_dim", self.latent_dim)
            .with_meta("target_dim", self.target_dim)
            .with_meta("condition_dim", self.condition_dim)
            .with_net("encoder", self.encoder.clone())
            .with_net("decoder", self.decoder.clone());
        crate::checkpoint::save_bundle(path, &bundle)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bundle = crate::checkpoint::load_bundle(path)?;
        let role = CvaeRole::parse(bundle.meta("role").unwrap_or(""))?;
        let latent_dim = bundle.meta_parsed("latent_dim", path)?;
        let target_dim = bundle.meta_parsed("target_dim", path)?;
        let condition_dim = bundle.meta_parsed("condition_dim", path)?;
        let encoder = bundle.take_net("encoder", path)?;
        let decoder = bundle.take_net("decoder", path)?;
        Ok(CvaeModel {
            encoder,
            decoder,
            latent_dim,
            target_dim,
            condition_dim,
            role,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvaeTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight on the KL term; the variational bound weights both terms
    /// equally, so this defaults to 1.
    pub kl_weight: f64,
    /// Component clip applied to latents drawn at generation time.
    pub z_clip: f64,
    pub learning_rate: f64,
}

impl Default for CvaeTrainConfig {
    fn default() -> Self {
        CvaeTrainConfig {
            epochs: 60,
            batch_size: 128,
            kl_weight: 1.0,
            z_clip: 2.0,
            learning_rate: 1e-3,
        }
    }
}

/// Scratch buffers for one loss evaluation.
pub struct CvaeScratch {
    enc_ws: Workspace,
    dec_ws: Workspace,
    enc_in: Vec<f64>,
    dec_in: Vec<f64>,
    enc_out_grad: Vec<f64>,
    dec_in_grad: Vec<f64>,
    enc_in_grad: Vec<f64>,
    dec_out_grad: Vec<f64>,
}

impl CvaeScratch {
    pub fn for_model(model: &CvaeModel) -> Self {
        CvaeScratch {
            enc_ws: Workspace::for_model(&model.encoder),
            dec_ws: Workspace::for_model(&model.decoder),
            enc_in: vec![0.0; model.encoder.input_dim()],
            dec_in: vec![0.0; model.decoder.input_dim()],
            enc_out_grad: vec![0.0; 2 * model.latent_dim],
            dec_in_grad: vec![0.0; model.decoder.input_dim()],
            enc_in_grad: vec![0.0; model.encoder.input_dim()],
            dec_out_grad: vec![0.0; model.target_dim],
        }
    }
}

/// Per-sample loss with a caller-supplied latent noise vector:
/// squared reconstruction error plus `kl_weight` times the closed-form KL
/// `0.5 * sum(mu^2 + sigma^2 - 1 - 2 ln sigma)`. Gradients are accumulated
/// into `enc_grads` / `dec_grads`.
///
/// Taking `eps` explicitly keeps the function deterministic, which is what
/// lets tests check the analytic gradients with finite differences.
#[allow(clippy::too_many_arguments)]
pub fn cvae_loss_with_noise(
    model: &CvaeModel,
    target: &[f64],
    condition: &[f64],
    eps: &[f64],
    kl_weight: f64,
    scratch: &mut CvaeScratch,
    enc_grads: &mut Gradients,
    dec_grads: &mut Gradients,
) -> f64 {
    assert_eq!(target.len(), model.target_dim, "cvae target dim");
    assert_eq!(condition.len(), model.condition_dim, "cvae condition dim");
    assert_eq!(eps.len(), model.latent_dim, "cvae eps dim");
    let latent = model.latent_dim;

    scratch.enc_in[..target.len()].copy_from_slice(target);
    scratch.enc_in[target.len()..].copy_from_slice(condition);
    model.encoder.forward_into(&scratch.enc_in, &mut scratch.enc_ws);
    let enc_out = scratch.enc_ws.output().to_vec();
    let (mu, log_sigma) = enc_out.split_at(latent);
    let sigma: Vec<f64> = log_sigma.iter().map(|ls| ls.exp()).collect();

    // z = mu + sigma .* eps
    for i in 0..latent {
        scratch.dec_in[i] = mu[i] + sigma[i] * eps[i];
    }
    scratch.dec_in[latent..].copy_from_slice(condition);
    model.decoder.forward_into(&scratch.dec_in, &mut scratch.dec_ws);
    let recon = scratch.dec_ws.output().to_vec();

    let recon_loss: f64 = target
        .iter()
        .zip(recon.iter())
        .map(|(t, r)| (t - r) * (t - r))
        .sum();
    let kl: f64 = (0..latent)
        .map(|i| 0.5 * (mu[i] * mu[i] + sigma[i] * sigma[i] - 1.0 - 2.0 * log_sigma[i]))
        .sum();
    let loss = recon_loss + kl_weight * kl;

    // d recon / d recon_out = -2 (t - r); backprop through the decoder.
    for i in 0..model.target_dim {
        scratch.dec_out_grad[i] = -2.0 * (target[i] - recon[i]);
    }
    model.decoder.accumulate_gradients(
        &scratch.dec_in,
        &mut scratch.dec_ws,
        &scratch.dec_out_grad,
        dec_grads,
        &mut scratch.dec_in_grad,
    );

    // Chain into the encoder output through z, plus the KL's own terms:
    //   dL/dmu_i = dL/dz_i + w * mu_i
    //   dL/dls_i = dL/dz_i * eps_i * sigma_i + w * (sigma_i^2 - 1)
    for i in 0..latent {
        let dz = scratch.dec_in_grad[i];
        scratch.enc_out_grad[i] = dz + kl_weight * mu[i];
        scratch.enc_out_grad[latent + i] =
            dz * eps[i] * sigma[i] + kl_weight * (sigma[i] * sigma[i] - 1.0);
    }
    model.encoder.accumulate_gradients(
        &scratch.enc_in,
        &mut scratch.enc_ws,
        &scratch.enc_out_grad,
        enc_grads,
        &mut scratch.enc_in_grad,
    );

    loss
}

/// Loss with latent noise drawn from `rng` (the training path).
#[allow(clippy::too_many_arguments)]
pub fn cvae_loss(
    model: &CvaeModel,
    target: &[f64],
    condition: &[f64],
    rng: &mut ChaCha12Rng,
    kl_weight: f64,
    scratch: &mut CvaeScratch,
    enc_grads: &mut Gradients,
    dec_grads: &mut Gradients,
) -> Result<f64> {
    let eps: Vec<f64> = (0..model.latent_dim)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let loss = cvae_loss_with_noise(
        model, target, condition, &eps, kl_weight, scratch, enc_grads, dec_grads,
    );
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            context: "cvae_loss",
            detail: format!("loss = {loss}"),
        });
    }
    Ok(loss)
}

/// Draw `count` targets for a condition: latents from a clipped standard
/// normal, decoded with the condition appended.
pub fn cvae_generate(
    model: &CvaeModel,
    condition: &[f64],
    count: usize,
    z_clip: f64,
    rng: &mut ChaCha12Rng,
) -> Vec<Vec<f64>> {
    assert_eq!(condition.len(), model.condition_dim, "cvae condition dim");
    assert!(count >= 1, "cvae_generate: count >= 1");
    let mut ws = Workspace::for_model(&model.decoder);
    let mut dec_in = vec![0.0; model.decoder.input_dim()];
    dec_in[model.latent_dim..].copy_from_slice(condition);
    (0..count)
        .map(|_| {
            for slot in dec_in.iter_mut().take(model.latent_dim) {
                let e: f64 = rng.sample(StandardNormal);
                *slot = e.clamp(-z_clip, z_clip);
            }
            model.decoder.forward_into(&dec_in, &mut ws).to_vec()
        })
        .collect()
}

pub fn cvae_generate_one(
    model: &CvaeModel,
    condition: &[f64],
    z_clip: f64,
    rng: &mut ChaCha12Rng,
) -> Vec<f64> {
    cvae_generate(model, condition, 1, z_clip, rng).pop().unwrap()
}

/// Extract the (target, condition) pair for this model's role from a
/// transition, with states normalized by the dataset's statistics.
pub fn role_example(
    model: &CvaeModel,
    dataset: &TransitionDataset,
    index: usize,
) -> (Vec<f64>, Vec<f64>) {
    let t = dataset.get(index);
    let s = dataset.normalize_state(&t.state);
    let s2 = dataset.normalize_state(&t.next_state);
    match model.role {
        CvaeRole::StateTransition => (s2, s),
        CvaeRole::InverseAction => (t.action.clone(), [s, s2].concat()),
        CvaeRole::Reward => (vec![t.reward], [s, s2].concat()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvaeTrainReport {
    /// Mean loss per optimization step.
    pub loss_trace: Vec<f64>,
    /// Mean-mode reconstruction MSE (per dimension) on the held-out 10%.
    pub heldout_mse: f64,
}

/// Train in place; every tenth transition is held out for the
/// reconstruction report and never trains.
pub fn train_cvae(
    model: &mut CvaeModel,
    dataset: &TransitionDataset,
    config: &CvaeTrainConfig,
    rng: &mut ChaCha12Rng,
) -> Result<CvaeTrainReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let train_idx: Vec<usize> = (0..dataset.len()).filter(|i| i % 10 != 9).collect();
    let held_idx: Vec<usize> = (0..dataset.len()).filter(|i| i % 10 == 9).collect();

    let mut enc_adam = AdamState::new(&model.encoder, config.learning_rate);
    let mut dec_adam = AdamState::new(&model.decoder, config.learning_rate);
    let mut enc_grads = Gradients::zeros_like(&model.encoder);
    let mut dec_grads = Gradients::zeros_like(&model.decoder);
    let mut scratch = CvaeScratch::for_model(model);

    let steps_per_epoch = train_idx.len().div_ceil(config.batch_size).max(1);
    let mut loss_trace = Vec::with_capacity(config.epochs * steps_per_epoch);
    for epoch in 0..config.epochs {
        for step in 0..steps_per_epoch {
            enc_grads.zero();
            dec_grads.zero();
            let mut batch_loss = 0.0;
            for _ in 0..config.batch_size {
                let idx = train_idx[rng.random_range(0..train_idx.len())];
                let (target, condition) = role_example(model, dataset, idx);
                batch_loss += cvae_loss(
                    model,
                    &target,
                    &condition,
                    rng,
                    config.kl_weight,
                    &mut scratch,
                    &mut enc_grads,
                    &mut dec_grads,
                )?;
            }
            let scale = 1.0 / config.batch_size as f64;
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    step: epoch * steps_per_epoch + step,
                    detail: format!("cvae {} loss {batch_loss}", model.role.as_str()),
                });
            }
            enc_grads.scale(scale);
            dec_grads.scale(scale);
            adam_step(&mut model.encoder, &enc_grads, &mut enc_adam)?;
            adam_step(&mut model.decoder, &dec_grads, &mut dec_adam)?;
            loss_trace.push(batch_loss);
        }
    }

    let eval_idx = if held_idx.is_empty() { &train_idx } else { &held_idx };
    let heldout_mse = reconstruction_mse(model, dataset, eval_idx);
    Ok(CvaeTrainReport { loss_trace, heldout_mse })
}

/// Mean-per-dimension squared error of the deterministic reconstruction
/// path (latent fixed at the encoder mean).
pub fn reconstruction_mse(model: &CvaeModel, dataset: &TransitionDataset, indices: &[usize]) -> f64 {
    let mut enc_ws = Workspace::for_model(&model.encoder);
    let mut dec_ws = Workspace::for_model(&model.decoder);
    let mut total = 0.0;
    for &i in indices {
        let (target, condition) = role_example(model, dataset, i);
        let enc_in = [target.clone(), condition.clone()].concat();
        model.encoder.forward_into(&enc_in, &mut enc_ws);
        let mu = enc_ws.output()[..model.latent_dim].to_vec();
        let dec_in = [mu, condition].concat();
        model.decoder.forward_into(&dec_in, &mut dec_ws);
        let err: f64 = dec_ws
            .output()
            .iter()
            .zip(target.iter())
            .map(|(r, t)| (r - t) * (r - t))
            .sum();
        total += err / model.target_dim as f64;
    }
    total / indices.len().max(1) as f64
}
