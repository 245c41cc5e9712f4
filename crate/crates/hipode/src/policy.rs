//! Downstream offline learner: a deterministic actor-critic with a
//! behavior-cloning term (TD3+BC style).
//!
//! Twin critics regress onto `r + γ (1-done) min(Q̄₁, Q̄₂)(s', ā)` where
//! `ā` is the target actor's action plus clipped smoothing noise. The
//! actor maximizes `λ Q₁(s, π(s)) - ‖π(s) - a‖²` with
//! `λ = α_bc / mean|Q₁(s, π(s))|` per batch (λ is treated as a constant
//! when differentiating), so `α_bc → 0` collapses to behavior cloning.
//!
//! The learner consumes either a fixed dataset or a realtime mixed stream
//! from the augmentor; it never feeds anything back, which is what makes
//! the augmentation policy-decoupled.

use crate::augment::{realtime_batch, AugmentConfig, TrainedModels};
use crate::data::{Transition, TransitionDataset};
use crate::envs::{expert_action, step, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::{adam_step, soft_update, Activation, AdamState, Gradients, Mlp, Workspace};
use crate::rng::{indexed_substream, substream};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const POLICY_HIDDEN: usize = 256;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// TD3+BC α: weight of the Q term relative to behavior cloning.
    pub bc_weight: f64,
    pub policy_delay: usize,
    pub target_noise: f64,
    pub noise_clip: f64,
    pub tau: f64,
    pub discount: f64,
    pub hidden: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            bc_weight: 2.5,
            policy_delay: 2,
            target_noise: 0.2,
            noise_clip: 0.5,
            tau: 0.005,
            discount: 0.99,
            hidden: POLICY_HIDDEN,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Record a learning-curve point every this many steps.
    pub curve_every: usize,
}

impl Default for PolicyTrainConfig {
    fn default() -> Self {
        PolicyTrainConfig {
            steps: 6000,
            batch_size: 256,
            learning_rate: 1e-3,
            curve_every: 100,
        }
    }
}

/// Actor, twin critics, their targets, and the normalization statistics
/// the networks were trained under.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub actor_target: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    pub state_mean: Vec<f64>,
    pub state_std: Vec<f64>,
    pub cfg: PolicyConfig,
}

impl ActorCritic {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        cfg: PolicyConfig,
        state_mean: Vec<f64>,
        state_std: Vec<f64>,
        rng: &mut ChaCha12Rng,
    ) -> Result<Self> {
        let actor = Mlp::new(
            &[state_dim, cfg.hidden, action_dim],
            Activation::Relu,
            Activation::Tanh,
            rng,
        )?;
        let critic1 = Mlp::new(
            &[state_dim + action_dim, cfg.hidden, 1],
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        let critic2 = Mlp::new(
            &[state_dim + action_dim, cfg.hidden, 1],
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        Ok(ActorCritic {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            state_mean,
            state_std,
            cfg,
        })
    }

    fn normalize(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .zip(self.state_mean.iter().zip(self.state_std.iter()))
            .map(|(x, (m, sd))| (x - m) / sd)
            .collect()
    }

    /// Deterministic action for a raw-unit state, in `[-1, 1]^action_dim`.
    pub fn act(&self, state: &[f64]) -> Vec<f64> {
        self.actor
            .forward(&self.normalize(state))
            .expect("actor dim")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bundle = crate::checkpoint::Bundle::new()
            .with_meta("kind", "actor_critic")
            .with_meta("bc_weight", self.cfg.bc_weight)
            .with_meta("policy_delay", self.cfg.policy_delay)
            .with_meta("target_noise", self.cfg.target_noise)
            .with_meta("noise_clip", self.cfg.noise_clip)
            .with_meta("tau", self.cfg.tau)
            .with_meta("discount", self.cfg.discount)
            .with_meta("hidden", self.cfg.hidden)
            .with_net("actor", self.actor.clone())
            .with_net("critic1", self.critic1.clone())
            .with_net("critic2", self.critic2.clone())
            .with_net("actor_target", self.actor_target.clone())
            .with_net("critic1_target", self.critic1_target.clone())
            .with_net("critic2_target", self.critic2_target.clone())
            .with_vec("state_mean", self.state_mean.clone())
            .with_vec("state_std", self.state_std.clone());
        crate::checkpoint::save_bundle(path, &bundle)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bundle = crate::checkpoint::load_bundle(path)?;
        let cfg = PolicyConfig {
            bc_weight: bundle.meta_parsed("bc_weight", path)?,
            policy_delay: bundle.meta_parsed("policy_delay", path)?,
            target_noise: bundle.meta_parsed("target_noise", path)?,
            noise_clip: bundle.meta_parsed("noise_clip", path)?,
            tau: bundle.meta_parsed("tau", path)?,
            discount: bundle.meta_parsed("discount", path)?,
            hidden: bundle.meta_parsed("hidden", path)?,
        };
        Ok(ActorCritic {
            actor: bundle.take_net("actor", path)?,
            critic1: bundle.take_net("critic1", path)?,
            critic2: bundle.take_net("critic2", path)?,
            actor_target: bundle.take_net("actor_target", path)?,
            critic1_target: bundle.take_net("critic1_target", path)?,
            critic2_target: bundle.take_net("critic2_target", path)?,
            state_mean: bundle.take_vec("state_mean", path)?,
            state_std: bundle.take_vec("state_std", path)?,
            cfg,
        })
    }
}

/// Where training batches come from.
pub enum DataSource<'a> {
    Offline(&'a TransitionDataset),
    Realtime {
        models: &'a TrainedModels,
        dataset: &'a TransitionDataset,
        cfg: &'a AugmentConfig,
        env: Option<&'a EnvSpec>,
    },
}

impl DataSource<'_> {
    fn base_dataset(&self) -> &TransitionDataset {
        match self {
            DataSource::Offline(ds) => ds,
            DataSource::Realtime { dataset, .. } => dataset,
        }
    }

    fn next_batch(&self, batch_size: usize, rng: &mut ChaCha12Rng) -> Result<Vec<Transition>> {
        match self {
            DataSource::Offline(ds) => Ok(ds
                .sample_batch(batch_size, rng)?
                .into_iter()
                .cloned()
                .collect()),
            DataSource::Realtime {
                models,
                dataset,
                cfg,
                env,
            } => realtime_batch(models, dataset, cfg, batch_size, rng, *env),
        }
    }
}

/// A normalized training item.
#[derive(Debug, Clone)]
struct Item {
    sn: Vec<f64>,
    action: Vec<f64>,
    reward: f64,
    s2n: Vec<f64>,
    done: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
}

/// Clipped-noise target values `r + γ(1-done) min(Q̄₁, Q̄₂)(s', ā)`.
/// `noise` holds one pre-drawn clipped offset per item (action_dim each).
fn critic_targets_with_noise(model: &ActorCritic, items: &[Item], noise: &[Vec<f64>]) -> Vec<f64> {
    let mut aws = Workspace::for_model(&model.actor_target);
    let mut c1ws = Workspace::for_model(&model.critic1_target);
    let mut c2ws = Workspace::for_model(&model.critic2_target);
    items
        .iter()
        .zip(noise.iter())
        .map(|(item, eps)| {
            if item.done {
                return item.reward;
            }
            let a = model.actor_target.forward_into(&item.s2n, &mut aws);
            let smoothed: Vec<f64> = a
                .iter()
                .zip(eps.iter())
                .map(|(ai, ni)| (ai + ni).clamp(-1.0, 1.0))
                .collect();
            let x = [item.s2n.as_slice(), smoothed.as_slice()].concat();
            let q1 = model.critic1_target.forward_into(&x, &mut c1ws)[0];
            let q2 = model.critic2_target.forward_into(&x, &mut c2ws)[0];
            item.reward + model.cfg.discount * q1.min(q2)
        })
        .collect()
}

/// Mean of `(Q1 - y)² + (Q2 - y)²` and per-critic gradients, with the
/// targets supplied by the caller.
fn critic_loss_against_targets(
    model: &ActorCritic,
    items: &[Item],
    targets: &[f64],
) -> (f64, Gradients, Gradients) {
    let mut g1 = Gradients::zeros_like(&model.critic1);
    let mut g2 = Gradients::zeros_like(&model.critic2);
    let mut w1 = Workspace::for_model(&model.critic1);
    let mut w2 = Workspace::for_model(&model.critic2);
    let mut input_grad = vec![0.0; model.critic1.input_dim()];
    let scale = 1.0 / items.len() as f64;
    let mut loss = 0.0;
    for (item, &y) in items.iter().zip(targets.iter()) {
        let x = [item.sn.as_slice(), item.action.as_slice()].concat();
        let q1 = model.critic1.forward_into(&x, &mut w1)[0];
        let q2 = model.critic2.forward_into(&x, &mut w2)[0];
        loss += ((q1 - y) * (q1 - y) + (q2 - y) * (q2 - y)) * scale;
        model
            .critic1
            .accumulate_gradients(&x, &mut w1, &[2.0 * (q1 - y) * scale], &mut g1, &mut input_grad);
        model
            .critic2
            .accumulate_gradients(&x, &mut w2, &[2.0 * (q2 - y) * scale], &mut g2, &mut input_grad);
    }
    (loss, g1, g2)
}

/// Mean per-sample `|Q₁(s, π(s))|`, used to scale the Q term.
fn mean_abs_q(model: &ActorCritic, items: &[Item]) -> f64 {
    let mut aws = Workspace::for_model(&model.actor);
    let mut cws = Workspace::for_model(&model.critic1);
    let mut acc = 0.0;
    for item in items {
        let a = model.actor.forward_into(&item.sn, &mut aws).to_vec();
        let x = [item.sn.as_slice(), a.as_slice()].concat();
        acc += model.critic1.forward_into(&x, &mut cws)[0].abs();
    }
    acc / items.len() as f64
}

/// Actor loss `mean[-λ Q₁(s, π(s)) + ‖π(s) - a‖²]` for a fixed λ, plus
/// actor gradients. The critic is differentiated with respect to its
/// action input only.
fn actor_loss_with_lambda(model: &ActorCritic, items: &[Item], lambda: f64) -> (f64, Gradients) {
    let state_dim = model.actor.input_dim();
    let action_dim = model.actor.output_dim();
    let mut grads = Gradients::zeros_like(&model.actor);
    let mut aws = Workspace::for_model(&model.actor);
    let mut cws = Workspace::for_model(&model.critic1);
    let mut critic_in_grad = vec![0.0; model.critic1.input_dim()];
    let mut actor_in_grad = vec![0.0; state_dim];
    let mut out_grad = vec![0.0; action_dim];
    let scale = 1.0 / items.len() as f64;
    let mut loss = 0.0;
    for item in items {
        let a_pi = model.actor.forward_into(&item.sn, &mut aws).to_vec();
        let x = [item.sn.as_slice(), a_pi.as_slice()].concat();
        let q = model.critic1.forward_into(&x, &mut cws)[0];
        let bc: f64 = a_pi
            .iter()
            .zip(item.action.iter())
            .map(|(p, a)| (p - a) * (p - a))
            .sum();
        loss += (-lambda * q + bc) * scale;

        // dLoss/da_pi = -λ dQ/da + 2 (a_pi - a)
        model
            .critic1
            .input_gradient(&x, &mut cws, &[1.0], &mut critic_in_grad);
        for j in 0..action_dim {
            out_grad[j] = (-lambda * critic_in_grad[state_dim + j]
                + 2.0 * (a_pi[j] - item.action[j]))
                * scale;
        }
        model
            .actor
            .accumulate_gradients(&item.sn, &mut aws, &out_grad, &mut grads, &mut actor_in_grad);
    }
    (loss, grads)
}

/// Train a TD3+BC learner from scratch on the given source.
pub fn train_policy(
    source: &DataSource,
    policy_cfg: &PolicyConfig,
    train_cfg: &PolicyTrainConfig,
    seed: u64,
) -> Result<(ActorCritic, Vec<CurvePoint>)> {
    let base = source.base_dataset();
    if base.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let state_dim = base.state_dim();
    let action_dim = base.action_dim();
    let mut rng = substream(seed, "policy.init");
    let mut model = ActorCritic::new(
        state_dim,
        action_dim,
        *policy_cfg,
        base.state_mean().to_vec(),
        base.state_std().to_vec(),
        &mut rng,
    )?;
    let mut adam_actor = AdamState::new(&model.actor, train_cfg.learning_rate);
    let mut adam_c1 = AdamState::new(&model.critic1, train_cfg.learning_rate);
    let mut adam_c2 = AdamState::new(&model.critic2, train_cfg.learning_rate);

    let mut data_rng = substream(seed, "policy.data");
    let mut noise_rng = substream(seed, "policy.noise");
    let mut curve = Vec::new();
    let mut last_actor_loss = f64::NAN;

    for step in 0..train_cfg.steps {
        let batch = source.next_batch(train_cfg.batch_size, &mut data_rng)?;
        let items: Vec<Item> = batch
            .iter()
            .map(|t| Item {
                sn: model.normalize(&t.state),
                action: t.action.clone(),
                reward: t.reward,
                s2n: model.normalize(&t.next_state),
                done: t.done,
            })
            .collect();

        let noise: Vec<Vec<f64>> = (0..items.len())
            .map(|_| {
                (0..action_dim)
                    .map(|_| {
                        let e: f64 = noise_rng.sample(StandardNormal);
                        (e * policy_cfg.target_noise)
                            .clamp(-policy_cfg.noise_clip, policy_cfg.noise_clip)
                    })
                    .collect()
            })
            .collect();
        let targets = critic_targets_with_noise(&model, &items, &noise);
        let (critic_loss, g1, g2) = critic_loss_against_targets(&model, &items, &targets);
        if !critic_loss.is_finite() {
            return Err(Error::Diverged {
                step,
                detail: format!("critic loss {critic_loss}"),
            });
        }
        adam_step(&mut model.critic1, &g1, &mut adam_c1)?;
        adam_step(&mut model.critic2, &g2, &mut adam_c2)?;

        if (step + 1) % policy_cfg.policy_delay == 0 {
            let lambda = if policy_cfg.bc_weight == 0.0 {
                0.0
            } else {
                policy_cfg.bc_weight / (mean_abs_q(&model, &items) + 1e-8)
            };
            let (actor_loss, ga) = actor_loss_with_lambda(&model, &items, lambda);
            if !actor_loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    detail: format!("actor loss {actor_loss}"),
                });
            }
            adam_step(&mut model.actor, &ga, &mut adam_actor)?;
            last_actor_loss = actor_loss;

            soft_update(&mut model.actor_target, &model.actor, policy_cfg.tau);
            soft_update(&mut model.critic1_target, &model.critic1, policy_cfg.tau);
            soft_update(&mut model.critic2_target, &model.critic2, policy_cfg.tau);
        }

        if step % train_cfg.curve_every == 0 || step + 1 == train_cfg.steps {
            curve.push(CurvePoint {
                step,
                critic_loss,
                actor_loss: last_actor_loss,
            });
        }
    }
    Ok((model, curve))
}

/// Who is driving evaluation rollouts.
pub enum Controller<'a> {
    Learned(&'a ActorCritic),
    Expert,
}

impl Controller<'_> {
    fn act(&self, spec: &EnvSpec, state: &[f64]) -> Vec<f64> {
        match self {
            Controller::Learned(m) => m.act(state),
            Controller::Expert => expert_action(spec, state),
        }
    }
}

/// Undiscounted return of one full-horizon episode from `start`.
pub fn rollout_return(controller: &Controller, spec: &EnvSpec, start: &[f64]) -> f64 {
    let mut state = start.to_vec();
    let mut total = 0.0;
    for t in 0..spec.horizon {
        let action = controller.act(spec, &state);
        let out = step(spec, &state, &action, t);
        total += out.reward;
        state = out.next_state;
        if out.done {
            break;
        }
    }
    total
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub returns: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Roll `episodes` seeded evaluation episodes from uniform starts.
pub fn evaluate(
    controller: &Controller,
    spec: &EnvSpec,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::invalid("episodes must be >= 1"));
    }
    let returns: Vec<f64> = (0..episodes)
        .map(|ep| {
            let mut rng = indexed_substream(seed, "policy.eval.episode", ep as u64);
            let start: Vec<f64> = (0..spec.state_dim)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            rollout_return(controller, spec, &start)
        })
        .collect();
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / episodes as f64;
    Ok(EvalReport {
        returns,
        mean,
        std: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{collect, complete_episode_returns, mean, BehaviorPolicySpec};
    use crate::testutil::max_param_grad_err;

    fn pointmass_items(n: usize, seed: u64) -> (TransitionDataset, Vec<Item>, ActorCritic) {
        let spec = EnvSpec::pointmass2d();
        let ds = collect(&spec, &BehaviorPolicySpec::medium(), 200.max(n), seed).unwrap();
        let mut rng = substream(seed, "policy.test.model");
        let cfg = PolicyConfig {
            hidden: 8,
            ..PolicyConfig::default()
        };
        let model = ActorCritic::new(
            2,
            2,
            cfg,
            ds.state_mean().to_vec(),
            ds.state_std().to_vec(),
            &mut rng,
        )
        .unwrap();
        let items: Vec<Item> = (0..n)
            .map(|i| {
                let t = ds.get(i);
                Item {
                    sn: model.normalize(&t.state),
                    action: t.action.clone(),
                    reward: t.reward,
                    s2n: model.normalize(&t.next_state),
                    done: t.done,
                }
            })
            .collect();
        (ds, items, model)
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        let (_ds, items, model) = pointmass_items(4, 3);
        let noise = vec![vec![0.05, -0.03]; 4];
        let targets = critic_targets_with_noise(&model, &items, &noise);
        let (_, g1, g2) = critic_loss_against_targets(&model, &items, &targets);

        let err1 = max_param_grad_err(&model.critic1, &g1, |net| {
            let mut probe = model.clone();
            probe.critic1 = net.clone();
            critic_loss_against_targets(&probe, &items, &targets).0
        });
        assert!(err1 < 1e-4, "critic1 grad err {err1}");
        let err2 = max_param_grad_err(&model.critic2, &g2, |net| {
            let mut probe = model.clone();
            probe.critic2 = net.clone();
            critic_loss_against_targets(&probe, &items, &targets).0
        });
        assert!(err2 < 1e-4, "critic2 grad err {err2}");
    }

    #[test]
    fn actor_gradients_match_finite_differences() {
        let (_ds, items, model) = pointmass_items(4, 5);
        let lambda = 0.8;
        let (_, grads) = actor_loss_with_lambda(&model, &items, lambda);
        let err = max_param_grad_err(&model.actor, &grads, |net| {
            let mut probe = model.clone();
            probe.actor = net.clone();
            actor_loss_with_lambda(&probe, &items, lambda).0
        });
        assert!(err < 1e-4, "actor grad err {err}");
    }

    #[test]
    fn critic_targets_use_twin_minimum() {
        let (_ds, items, mut model) = pointmass_items(3, 7);
        // Q̄1 ≡ 4, Q̄2 ≡ -1 -> bootstrap uses -1.
        let dims = [4usize, 1];
        let mut c1 = Mlp::zeros(&dims, Activation::Relu, Activation::Identity).unwrap();
        c1.set_flat_params(&[0.0, 0.0, 0.0, 0.0, 4.0]).unwrap();
        let mut c2 = Mlp::zeros(&dims, Activation::Relu, Activation::Identity).unwrap();
        c2.set_flat_params(&[0.0, 0.0, 0.0, 0.0, -1.0]).unwrap();
        model.critic1_target = c1;
        model.critic2_target = c2;
        let noise = vec![vec![0.0, 0.0]; 3];
        let targets = critic_targets_with_noise(&model, &items, &noise);
        for (item, y) in items.iter().zip(targets.iter()) {
            let want = if item.done {
                item.reward
            } else {
                item.reward + model.cfg.discount * (-1.0)
            };
            assert!((y - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_actor_static_return() {
        let spec = EnvSpec::pointmass2d();
        let mut rng = substream(8, "policy.test.zeroactor");
        let mut model = ActorCritic::new(
            2,
            2,
            PolicyConfig::default(),
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            &mut rng,
        )
        .unwrap();
        model.actor =
            Mlp::zeros(&[2, POLICY_HIDDEN, 2], Activation::Relu, Activation::Tanh).unwrap();
        let start = [0.2, -0.4];
        let d = ((start[0] - 0.8f64).powi(2) + (start[1] - 0.8f64).powi(2)).sqrt();
        let want = spec.horizon as f64 * (-d);
        let got = rollout_return(&Controller::Learned(&model), &spec, &start);
        assert!((got - want).abs() < 1e-9, "got {got} want {want}");
    }

    #[test]
    fn evaluate_returns_requested_episode_count() {
        let spec = EnvSpec::pointmass2d();
        let report = evaluate(&Controller::Expert, &spec, 10, 3).unwrap();
        assert_eq!(report.returns.len(), 10);
        assert!(report.mean.is_finite());
    }

    #[test]
    fn expert_through_eval_path_matches_collected_expert_stats() {
        let spec = EnvSpec::pointmass2d();
        let report = evaluate(&Controller::Expert, &spec, 40, 11).unwrap();
        let ds = collect(&spec, &BehaviorPolicySpec::expert(), 2000, 11).unwrap();
        let collected = complete_episode_returns(&ds);
        let collected_mean = mean(&collected);
        // same controller, different seeded starts: means agree within a
        // few standard errors
        let se = report.std / (report.returns.len() as f64).sqrt()
            + collected
                .iter()
                .map(|r| (r - collected_mean).powi(2))
                .sum::<f64>()
                .sqrt()
                / collected.len() as f64;
        assert!(
            (report.mean - collected_mean).abs() < 4.0 * se.max(0.5),
            "eval {} vs collect {}",
            report.mean,
            collected_mean
        );
    }

    #[test]
    fn bc_limit_clones_expert_actions() {
        // α_bc = 0 reduces the actor objective to behavior cloning.
        let spec = EnvSpec::pointmass2d();
        let ds = collect(&spec, &BehaviorPolicySpec::expert(), 2000, 13).unwrap();
        let policy_cfg = PolicyConfig {
            bc_weight: 0.0,
            hidden: 64,
            ..PolicyConfig::default()
        };
        let train_cfg = PolicyTrainConfig {
            steps: 3000,
            batch_size: 64,
            ..PolicyTrainConfig::default()
        };
        let (model, _) =
            train_policy(&DataSource::Offline(&ds), &policy_cfg, &train_cfg, 1).unwrap();
        let mut mse = 0.0;
        let probes = 500;
        for i in 0..probes {
            let t = ds.get(i * (ds.len() / probes));
            let a = model.act(&t.state);
            mse += a
                .iter()
                .zip(t.action.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                / a.len() as f64;
        }
        mse /= probes as f64;
        assert!(mse < 0.1, "behavior cloning MSE {mse}");
    }

    #[test]
    fn training_is_deterministic_for_fixed_seed() {
        let spec = EnvSpec::pointmass2d();
        let ds = collect(&spec, &BehaviorPolicySpec::medium(), 500, 17).unwrap();
        let policy_cfg = PolicyConfig {
            hidden: 16,
            ..PolicyConfig::default()
        };
        let train_cfg = PolicyTrainConfig {
            steps: 120,
            batch_size: 32,
            ..PolicyTrainConfig::default()
        };
        let (m1, c1) = train_policy(&DataSource::Offline(&ds), &policy_cfg, &train_cfg, 9).unwrap();
        let (m2, c2) = train_policy(&DataSource::Offline(&ds), &policy_cfg, &train_cfg, 9).unwrap();
        assert_eq!(m1.actor.flat_params(), m2.actor.flat_params());
        assert_eq!(c1.len(), c2.len());
        for (a, b) in c1.iter().zip(c2.iter()) {
            assert_eq!(a.critic_loss.to_bits(), b.critic_loss.to_bits());
        }
        let e1 = evaluate(&Controller::Learned(&m1), &spec, 5, 2).unwrap();
        let e2 = evaluate(&Controller::Learned(&m2), &spec, 5, 2).unwrap();
        assert_eq!(e1.returns, e2.returns);
    }

    #[test]
    fn save_load_round_trip() {
        let (_ds, _items, model) = pointmass_items(1, 19);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.ckpt");
        model.save(&path).unwrap();
        let loaded = ActorCritic::load(&path).unwrap();
        let s = [0.3, -0.6];
        assert_eq!(model.act(&s), loaded.act(&s));
        assert_eq!(loaded.cfg.bc_weight, model.cfg.bc_weight);
    }
}
