//! Run configuration: a flat key-value TOML file with an explicit schema
//! version. Every knob has a default; CLI flags override individual keys.

use crate::augment::{AblationKind, AugmentConfig, AugmentMode};
use crate::cvae::CvaeTrainConfig;
use crate::dynamics::DynamicsTrainConfig;
use crate::envs::{BehaviorPolicySpec, EnvName, EnvSpec};
use crate::error::{Error, Result};
use crate::policy::{PolicyConfig, PolicyTrainConfig};
use crate::value::{NsConfig, ValueTrainConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,

    // environment & data
    #[serde(default = "d_env")]
    pub env: String,
    #[serde(default = "d_grade")]
    pub grade: String,
    /// Optional dataset file; when set, `grade`/`n_transitions` are unused.
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default = "d_n_transitions")]
    pub n_transitions: usize,
    #[serde(default)]
    pub collect_seed: u64,

    // augmentation
    #[serde(default = "d_eta")]
    pub eta: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_candidates")]
    pub candidates: usize,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_augment_mode")]
    pub augment_mode: String,
    #[serde(default = "d_ablation")]
    pub ablation: String,
    #[serde(default)]
    pub clip_reward: bool,
    #[serde(default = "d_z_clip")]
    pub z_clip: f64,
    #[serde(default = "d_generation_batch")]
    pub generation_batch: usize,

    // model training
    #[serde(default = "d_cvae_epochs")]
    pub cvae_epochs: usize,
    #[serde(default = "d_model_batch")]
    pub cvae_batch: usize,
    #[serde(default = "d_cvae_hidden")]
    pub cvae_hidden: usize,
    #[serde(default = "d_kl_weight")]
    pub kl_weight: f64,
    #[serde(default = "d_value_steps")]
    pub value_steps: usize,
    #[serde(default = "d_model_batch")]
    pub value_batch: usize,
    #[serde(default = "d_small_hidden")]
    pub value_hidden: usize,
    #[serde(default = "d_noisy_samples")]
    pub noisy_samples_per_state: usize,
    #[serde(default = "d_target_update_period")]
    pub target_update_period: usize,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_dynamics_steps")]
    pub dynamics_steps: usize,
    #[serde(default = "d_model_batch")]
    pub dynamics_batch: usize,
    #[serde(default = "d_small_hidden")]
    pub dynamics_hidden: usize,
    #[serde(default = "d_discount")]
    pub discount: f64,
    #[serde(default = "d_learning_rate")]
    pub learning_rate: f64,

    // downstream policy
    #[serde(default = "d_policy_steps")]
    pub policy_steps: usize,
    #[serde(default = "d_policy_batch")]
    pub policy_batch: usize,
    #[serde(default = "d_bc_weight")]
    pub bc_weight: f64,
    #[serde(default = "d_policy_delay")]
    pub policy_delay: usize,
    #[serde(default = "d_target_noise")]
    pub target_noise: f64,
    #[serde(default = "d_noise_clip")]
    pub noise_clip: f64,
    #[serde(default = "d_small_hidden")]
    pub policy_hidden: usize,
    #[serde(default = "d_curve_every")]
    pub curve_every: usize,

    // evaluation & run layout
    #[serde(default = "d_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default = "d_density_bins")]
    pub density_bins: usize,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "d_out_dir")]
    pub out_dir: String,
}

fn d_env() -> String { "pointmass2d".into() }
fn d_grade() -> String { "medium".into() }
fn d_n_transitions() -> usize { 4000 }
fn d_eta() -> f64 { 0.2 }
fn d_lambda() -> f64 { 0.2 }
fn d_candidates() -> usize { 10 }
fn d_alpha() -> f64 { 1.0 }
fn d_sigma() -> f64 { 1.0 }
fn d_augment_mode() -> String { "offline_merge".into() }
fn d_ablation() -> String { "hipode".into() }
fn d_z_clip() -> f64 { 2.0 }
fn d_generation_batch() -> usize { 256 }
fn d_cvae_epochs() -> usize { 60 }
fn d_model_batch() -> usize { 128 }
fn d_cvae_hidden() -> usize { 750 }
fn d_kl_weight() -> f64 { 1.0 }
fn d_value_steps() -> usize { 6000 }
fn d_small_hidden() -> usize { 256 }
fn d_noisy_samples() -> usize { 1 }
fn d_target_update_period() -> usize { 2 }
fn d_tau() -> f64 { 0.005 }
fn d_dynamics_steps() -> usize { 4000 }
fn d_discount() -> f64 { 0.99 }
fn d_learning_rate() -> f64 { 1e-3 }
fn d_policy_steps() -> usize { 6000 }
fn d_policy_batch() -> usize { 256 }
fn d_bc_weight() -> f64 { 2.5 }
fn d_policy_delay() -> usize { 2 }
fn d_target_noise() -> f64 { 0.2 }
fn d_noise_clip() -> f64 { 0.5 }
fn d_curve_every() -> usize { 100 }
fn d_eval_episodes() -> usize { 10 }
fn d_density_bins() -> usize { 24 }
fn d_seeds() -> Vec<u64> { vec![0, 1, 2, 3, 4] }
fn d_out_dir() -> String { "runs/out".into() }

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str(&format!("schema_version = {SCHEMA_VERSION}"))
            .expect("defaults always parse")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        EnvName::parse(&self.env)?;
        self.behavior_policy()?;
        AugmentMode::parse(&self.augment_mode)?;
        AblationKind::parse(&self.ablation)?;
        self.augment_config(0).validate()?;
        self.ns_config().validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config("discount must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn env_spec(&self) -> EnvSpec {
        EnvSpec::by_name(EnvName::parse(&self.env).expect("validated env"))
    }

    pub fn behavior_policy(&self) -> Result<BehaviorPolicySpec> {
        match self.grade.as_str() {
            "random" => Ok(BehaviorPolicySpec::random()),
            "medium" => Ok(BehaviorPolicySpec::medium()),
            "expert" => Ok(BehaviorPolicySpec::expert()),
            "medium-replay" | "medium_replay" => Err(Error::Config(
                "medium-replay is a mixture; it is handled by the collect stage".into(),
            )),
            other => {
                if let Some(rest) = other.strip_prefix("noisy:") {
                    let sigma: f64 = rest
                        .parse()
                        .map_err(|_| Error::Config(format!("bad noisy grade `{other}`")))?;
                    Ok(BehaviorPolicySpec::noisy(sigma)?)
                } else {
                    Err(Error::Config(format!("unknown grade `{other}`")))
                }
            }
        }
    }

    /// The grade string is a mixture marker rather than a single policy.
    pub fn grade_is_replay(&self) -> bool {
        matches!(self.grade.as_str(), "medium-replay" | "medium_replay")
    }

    pub fn augment_config(&self, seed: u64) -> AugmentConfig {
        AugmentConfig {
            synthetic_rate: self.eta,
            selecting_rate: self.lambda,
            candidate_count: self.candidates,
            penalty_weight: self.alpha,
            penalty_scope: self.sigma,
            generation_batch: self.generation_batch,
            seed,
            mode: AugmentMode::parse(&self.augment_mode).expect("validated mode"),
            ablation: AblationKind::parse(&self.ablation).expect("validated ablation"),
            clip_reward: self.clip_reward,
            z_clip: self.z_clip,
        }
    }

    pub fn cvae_train_config(&self) -> CvaeTrainConfig {
        CvaeTrainConfig {
            epochs: self.cvae_epochs,
            batch_size: self.cvae_batch,
            kl_weight: self.kl_weight,
            z_clip: self.z_clip,
            learning_rate: self.learning_rate,
        }
    }

    pub fn ns_config(&self) -> NsConfig {
        NsConfig {
            penalty_weight: self.alpha,
            penalty_scope: self.sigma,
            noisy_samples_per_state: self.noisy_samples_per_state,
            target_update_period: self.target_update_period,
            tau: self.tau,
        }
    }

    pub fn value_train_config(&self) -> ValueTrainConfig {
        ValueTrainConfig {
            steps: self.value_steps,
            batch_size: self.value_batch,
            learning_rate: self.learning_rate,
        }
    }

    pub fn dynamics_train_config(&self) -> DynamicsTrainConfig {
        DynamicsTrainConfig {
            steps: self.dynamics_steps,
            batch_size: self.dynamics_batch,
            learning_rate: self.learning_rate,
        }
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            bc_weight: self.bc_weight,
            policy_delay: self.policy_delay,
            target_noise: self.target_noise,
            noise_clip: self.noise_clip,
            tau: self.tau,
            discount: self.discount,
            hidden: self.policy_hidden,
        }
    }

    pub fn policy_train_config(&self) -> PolicyTrainConfig {
        PolicyTrainConfig {
            steps: self.policy_steps,
            batch_size: self.policy_batch,
            learning_rate: self.learning_rate,
            curve_every: self.curve_every,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.schema_version, SCHEMA_VERSION);
        assert_eq!(cfg.eta, 0.2);
        assert_eq!(cfg.lambda, 0.2);
        assert_eq!(cfg.candidates, 10);
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.sigma, 1.0);
        assert_eq!(cfg.bc_weight, 2.5);
        let text = cfg.to_toml();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let err = RunConfig::parse("schema_version = 99");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("schema_version = 1\nnot_a_key = 5");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn noisy_grade_parses_with_scale() {
        let cfg = RunConfig::parse("schema_version = 1\ngrade = \"noisy:0.25\"").unwrap();
        let policy = cfg.behavior_policy().unwrap();
        assert_eq!(policy.noise_scale, 0.25);
    }

    #[test]
    fn invalid_knobs_are_rejected() {
        assert!(RunConfig::parse("schema_version = 1\neta = 1.5").is_err());
        assert!(RunConfig::parse("schema_version = 1\nlambda = 0.0").is_err());
        assert!(RunConfig::parse("schema_version = 1\nseeds = []").is_err());
        assert!(RunConfig::parse("schema_version = 1\nenv = \"mars\"").is_err());
    }
}
