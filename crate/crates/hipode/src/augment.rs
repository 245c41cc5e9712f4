//! The synthetic-transition generation pipeline.
//!
//! For each source state `s` drawn from the dataset:
//!
//! 1. the state-transition CVAE proposes `n` candidate next states,
//! 2. the pessimistic value net picks the candidate with the highest value,
//! 3. the inverse-action and reward CVAEs replenish `ã` and `r̃`,
//! 4. the forward dynamics model predicts where `ã` would actually lead,
//!    and the distance `‖s̃'_dyna - s̃'‖` (normalized units) is recorded.
//!
//! A batch of generated transitions is then λ-filtered: only the portion
//! with the smallest dynamics distance survives. In `offline_merge` mode
//! the survivors are appended to the dataset (`floor(η·N)` of them); in
//! `realtime` mode each downstream training batch of size `N` is mixed
//! from `round(η·N)` synthetic and the rest real transitions, with the
//! same pool-then-filter semantics on an oversized pool.
//!
//! Generation is policy-decoupled: nothing here sees the downstream
//! learner. Every pool item draws from its own derived RNG stream, so
//! pools are bit-reproducible regardless of worker parallelism.

use crate::cvae::{cvae_generate, cvae_generate_one, CvaeModel};
use crate::data::{Transition, TransitionDataset};
use crate::dynamics::{DynamicsModel, PredictMode};
use crate::envs::{expert_action, step, EnvSpec};
use crate::error::{Error, Result};
use crate::rng::{indexed_substream, substream};
use crate::value::{select_best, ValueModel};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The five models the generator needs, all trained on the same dataset.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub state_cvae: CvaeModel,
    pub action_cvae: CvaeModel,
    pub reward_cvae: CvaeModel,
    pub value: ValueModel,
    pub dynamics: DynamicsModel,
}

impl TrainedModels {
    fn validate_for(&self, dataset: &TransitionDataset) -> Result<()> {
        let sd = dataset.state_dim();
        let ad = dataset.action_dim();
        let checks = [
            (self.state_cvae.condition_dim, sd),
            (self.action_cvae.condition_dim, 2 * sd),
            (self.reward_cvae.condition_dim, 2 * sd),
            (self.value.online.input_dim(), sd),
            (self.dynamics.net.input_dim(), sd + ad),
        ];
        for (got, want) in checks {
            if got != want {
                return Err(Error::DimMismatch {
                    context: "models vs dataset",
                    expected: want,
                    actual: got,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    OfflineMerge,
    Realtime,
}

impl AugmentMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "offline_merge" | "offline-merge" => Ok(AugmentMode::OfflineMerge),
            "realtime" => Ok(AugmentMode::Realtime),
            other => Err(Error::invalid(format!("unknown augment mode `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AugmentMode::OfflineMerge => "offline_merge",
            AugmentMode::Realtime => "realtime",
        }
    }
}

/// Generation strategy. `Hipode` is the full pipeline; `NoV` replaces the
/// value argmax with a uniform pick; `Repeat` resamples the
/// top-10%-return real transitions instead of generating; `Noise(σ)`
/// re-steps dataset states through the real environment with perturbed
/// actions (diversity-style augmentation); `None` disables augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AblationKind {
    Hipode,
    NoV,
    Repeat,
    Noise(f64),
    None,
}

impl AblationKind {
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("noise:") {
            let sigma: f64 = rest
                .parse()
                .map_err(|_| Error::invalid(format!("bad noise scale `{rest}`")))?;
            if sigma < 0.0 {
                return Err(Error::invalid("noise scale must be non-negative"));
            }
            return Ok(AblationKind::Noise(sigma));
        }
        match s {
            "hipode" => Ok(AblationKind::Hipode),
            "nov" => Ok(AblationKind::NoV),
            "repeat" => Ok(AblationKind::Repeat),
            "none" => Ok(AblationKind::None),
            other => Err(Error::invalid(format!("unknown ablation `{other}`"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            AblationKind::Hipode => "hipode".into(),
            AblationKind::NoV => "nov".into(),
            AblationKind::Repeat => "repeat".into(),
            AblationKind::Noise(s) => format!("noise:{s}"),
            AblationKind::None => "none".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    /// Synthetic rate η: fraction of the merged dataset (offline) or of
    /// each training batch (realtime) made of synthetic transitions.
    pub synthetic_rate: f64,
    /// Selecting rate λ: portion of each generated pool kept by the
    /// dynamics-consistency filter.
    pub selecting_rate: f64,
    /// Candidate next states per source state.
    pub candidate_count: usize,
    /// Echo of the value model's negative-sampling penalty weight α.
    pub penalty_weight: f64,
    /// Echo of the value model's penalty scope σ.
    pub penalty_scope: f64,
    /// Worker chunk size for pool generation.
    pub generation_batch: usize,
    pub seed: u64,
    pub mode: AugmentMode,
    pub ablation: AblationKind,
    /// Clip generated rewards into the dataset's observed range.
    pub clip_reward: bool,
    /// Latent clip for CVAE sampling.
    pub z_clip: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            synthetic_rate: 0.2,
            selecting_rate: 0.2,
            candidate_count: 10,
            penalty_weight: 1.0,
            penalty_scope: 1.0,
            generation_batch: 256,
            seed: 0,
            mode: AugmentMode::OfflineMerge,
            ablation: AblationKind::Hipode,
            clip_reward: false,
            z_clip: 2.0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.synthetic_rate) {
            return Err(Error::invalid("synthetic_rate must be in [0, 1)"));
        }
        if !(self.selecting_rate > 0.0 && self.selecting_rate <= 1.0) {
            return Err(Error::invalid("selecting_rate must be in (0, 1]"));
        }
        if self.candidate_count == 0 {
            return Err(Error::invalid("candidate_count must be >= 1"));
        }
        if self.generation_batch == 0 {
            return Err(Error::invalid("generation_batch must be >= 1"));
        }
        if self.z_clip <= 0.0 {
            return Err(Error::invalid("z_clip must be positive"));
        }
        Ok(())
    }
}

/// A generated transition plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTransition {
    pub transition: Transition,
    /// Index of the source state in the original dataset.
    pub source_state_index: usize,
    /// Which of the `n` candidates won the selection.
    pub candidate_rank: usize,
    /// `‖s̃'_dyna - s̃'‖` in normalized state units.
    pub dynamics_distance: f64,
}

/// Per-item generation trace for verification: the full candidate set
/// (normalized units) and the winning index.
#[derive(Debug, Clone)]
pub struct PoolTrace {
    pub candidates: Vec<Vec<f64>>,
    pub selected: usize,
}

/// Generate `pool_size` pre-filter transitions (Hipode or NoV selection),
/// along with per-item candidate traces.
pub fn generate_pool_traced(
    models: &TrainedModels,
    dataset: &TransitionDataset,
    cfg: &AugmentConfig,
    pool_size: usize,
    pool_seed: u64,
) -> Result<(Vec<SyntheticTransition>, Vec<PoolTrace>)> {
    cfg.validate()?;
    models.validate_for(dataset)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !matches!(cfg.ablation, AblationKind::Hipode | AblationKind::NoV) {
        return Err(Error::invalid(format!(
            "generate_pool drives hipode/nov selection, not `{}`",
            cfg.ablation.label()
        )));
    }
    let n = cfg.candidate_count;
    let (reward_lo, reward_hi) = dataset.reward_range();

    // Sources come from one deterministic stream so ablations sharing a
    // seed generate from identical source states.
    let mut source_rng = substream(pool_seed, "augment.sources");
    let sources = dataset.sample_indices(pool_size, &mut source_rng)?;

    let results: Vec<(SyntheticTransition, PoolTrace)> = (0..pool_size)
        .into_par_iter()
        .with_min_len(cfg.generation_batch)
        .map(|i| {
            let mut rng = indexed_substream(pool_seed, "augment.item", i as u64);
            let src_idx = sources[i];
            let source = dataset.get(src_idx);
            let s_norm = dataset.normalize_state(&source.state);

            let candidates = cvae_generate(&models.state_cvae, &s_norm, n, cfg.z_clip, &mut rng);
            let (rank, selected_norm) = match cfg.ablation {
                AblationKind::Hipode => {
                    select_best(&models.value, &candidates).expect("non-empty candidates")
                }
                AblationKind::NoV => {
                    let j = if n == 1 { 0 } else { rng.random_range(0..n) };
                    (j, candidates[j].clone())
                }
                _ => unreachable!(),
            };

            let pair_cond = [s_norm.as_slice(), selected_norm.as_slice()].concat();
            let action = cvae_generate_one(&models.action_cvae, &pair_cond, cfg.z_clip, &mut rng);
            let mut reward =
                cvae_generate_one(&models.reward_cvae, &pair_cond, cfg.z_clip, &mut rng)[0];
            if cfg.clip_reward {
                reward = reward.clamp(reward_lo, reward_hi);
            }

            let dyna_norm = models
                .dynamics
                .predict(&s_norm, &action, PredictMode::Mean, &mut rng);
            let dynamics_distance = dyna_norm
                .iter()
                .zip(selected_norm.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();

            let transition = Transition {
                state: source.state.clone(),
                action,
                reward,
                next_state: dataset.denormalize_state(&selected_norm),
                done: false,
            };
            (
                SyntheticTransition {
                    transition,
                    source_state_index: src_idx,
                    candidate_rank: rank,
                    dynamics_distance,
                },
                PoolTrace {
                    candidates,
                    selected: rank,
                },
            )
        })
        .collect();

    let mut pool = Vec::with_capacity(pool_size);
    let mut traces = Vec::with_capacity(pool_size);
    for (item, trace) in results {
        if !item.dynamics_distance.is_finite() {
            return Err(Error::NonFinite {
                context: "generate_pool",
                detail: "dynamics distance".into(),
            });
        }
        pool.push(item);
        traces.push(trace);
    }
    Ok((pool, traces))
}

pub fn generate_pool(
    models: &TrainedModels,
    dataset: &TransitionDataset,
    cfg: &AugmentConfig,
    pool_size: usize,
) -> Result<Vec<SyntheticTransition>> {
    generate_pool_traced(models, dataset, cfg, pool_size, cfg.seed).map(|(pool, _)| pool)
}

/// The `k` pool entries with the smallest dynamics distance, ties broken
/// by pool order; output preserves pool order.
pub fn select_smallest(pool: &[SyntheticTransition], k: usize) -> Vec<SyntheticTransition> {
    let k = k.min(pool.len());
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| {
        pool[a]
            .dynamics_distance
            .total_cmp(&pool[b].dynamics_distance)
            .then(a.cmp(&b))
    });
    let mut keep: Vec<usize> = order.into_iter().take(k).collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| pool[i].clone()).collect()
}

/// Keep the `max(1, floor(λ·|pool|))` most dynamics-consistent transitions.
pub fn filter_lambda(pool: &[SyntheticTransition], lambda: f64) -> Result<Vec<SyntheticTransition>> {
    if pool.is_empty() {
        return Err(Error::invalid("filter_lambda: empty pool"));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid("selecting rate must be in (0, 1]"));
    }
    let k = ((lambda * pool.len() as f64).floor() as usize).max(1);
    Ok(select_smallest(pool, k))
}

/// Append synthetic transitions to the dataset; statistics recompute by
/// construction.
pub fn merge(
    dataset: &TransitionDataset,
    synthetic: &[SyntheticTransition],
) -> Result<TransitionDataset> {
    for s in synthetic {
        if s.transition.state.len() != dataset.state_dim()
            || s.transition.action.len() != dataset.action_dim()
        {
            return Err(Error::DimMismatch {
                context: "merge",
                expected: dataset.state_dim(),
                actual: s.transition.state.len(),
            });
        }
    }
    dataset.with_appended(
        synthetic.iter().map(|s| s.transition.clone()),
        format!("{}+synthetic", dataset.source_tag()),
    )
}

/// Smallest pool size whose λ-filter yields at least `target` survivors.
/// `ceil(target/λ)` up to float slack.
fn pool_size_for(target: usize, lambda: f64) -> usize {
    let mut p = ((target as f64) / lambda).ceil() as usize;
    p = p.max(target).max(1);
    while ((lambda * p as f64).floor() as usize).max(1) < target {
        p += 1;
    }
    p
}

pub struct AugmentOutcome {
    pub merged: TransitionDataset,
    pub synthetic: Vec<SyntheticTransition>,
}

/// Offline-merge augmentation: generate a `1/λ`-oversized pool, λ-filter
/// it down to exactly `floor(η·N)` transitions, and append them.
pub fn augment_offline(
    models: &TrainedModels,
    dataset: &TransitionDataset,
    cfg: &AugmentConfig,
    env: Option<&EnvSpec>,
) -> Result<AugmentOutcome> {
    cfg.validate()?;
    let target = (cfg.synthetic_rate * dataset.len() as f64).floor() as usize;
    if target == 0 || cfg.ablation == AblationKind::None {
        return Ok(AugmentOutcome {
            merged: dataset.clone(),
            synthetic: Vec::new(),
        });
    }
    let synthetic = match cfg.ablation {
        AblationKind::Hipode | AblationKind::NoV => {
            let pool_size = pool_size_for(target, cfg.selecting_rate);
            let pool = generate_pool(models, dataset, cfg, pool_size)?;
            select_smallest(&pool, target)
        }
        AblationKind::Repeat => repeat_pool(&models.value, dataset, target, cfg.seed)?,
        AblationKind::Noise(sigma) => {
            let spec = env.ok_or_else(|| {
                Error::invalid("noise ablation needs the environment to re-step actions")
            })?;
            noise_replay(spec, dataset, target, sigma, cfg.seed)?
        }
        AblationKind::None => unreachable!(),
    };
    let merged = merge(dataset, &synthetic)?;
    Ok(AugmentOutcome { merged, synthetic })
}

/// Resample the top-10%-return real transitions, ranked by
/// `r + γ V̄(s')`. These are members of the dataset, not generated data.
pub fn repeat_pool(
    value: &ValueModel,
    dataset: &TransitionDataset,
    count: usize,
    seed: u64,
) -> Result<Vec<SyntheticTransition>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut scored: Vec<(usize, f64)> = (0..dataset.len())
        .map(|i| {
            let t = dataset.get(i);
            let v = value.target_value(&dataset.normalize_state(&t.next_state));
            (i, t.reward + value.discount * v)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let top = &scored[..dataset.len().div_ceil(10)];

    let mut rng = substream(seed, "augment.repeat");
    Ok((0..count)
        .map(|_| {
            let (idx, _) = top[rng.random_range(0..top.len())];
            SyntheticTransition {
                transition: dataset.get(idx).clone(),
                source_state_index: idx,
                candidate_rank: 0,
                dynamics_distance: 0.0,
            }
        })
        .collect())
}

/// Diversity-style augmentation: perturb dataset actions with Gaussian
/// noise and re-step them through the real environment.
pub fn noise_replay(
    spec: &EnvSpec,
    dataset: &TransitionDataset,
    count: usize,
    sigma: f64,
    seed: u64,
) -> Result<Vec<SyntheticTransition>> {
    replay_with(spec, dataset, count, seed, "augment.noise", |t, _spec, rng| {
        t.action
            .iter()
            .map(|a| {
                let e: f64 = rng.sample(StandardNormal);
                (a + sigma * e).clamp(-1.0, 1.0)
            })
            .collect()
    })
}

/// Quality-style augmentation: replace dataset actions with the expert
/// controller's and re-step through the real environment.
pub fn quality_replay(
    spec: &EnvSpec,
    dataset: &TransitionDataset,
    count: usize,
    seed: u64,
) -> Result<Vec<SyntheticTransition>> {
    replay_with(spec, dataset, count, seed, "augment.quality", |t, spec, _rng| {
        expert_action(spec, &t.state)
    })
}

fn replay_with(
    spec: &EnvSpec,
    dataset: &TransitionDataset,
    count: usize,
    seed: u64,
    stream: &str,
    action_of: impl Fn(&Transition, &EnvSpec, &mut ChaCha12Rng) -> Vec<f64>,
) -> Result<Vec<SyntheticTransition>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = substream(seed, stream);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let idx = rng.random_range(0..dataset.len());
        let t = dataset.get(idx);
        let action = action_of(t, spec, &mut rng);
        let stepped = step(spec, &t.state, &action, 0);
        out.push(SyntheticTransition {
            transition: Transition {
                state: t.state.clone(),
                action,
                reward: stepped.reward,
                next_state: stepped.next_state,
                done: false,
            },
            source_state_index: idx,
            candidate_rank: 0,
            dynamics_distance: 0.0,
        });
    }
    Ok(out)
}

/// The synthetic and real halves of one mixed batch: `round(η·N)`
/// synthetic transitions (pool-then-filter, matching the offline
/// semantics) plus real transitions sampled with replacement. With η = 0
/// the call consumes rng exactly like plain sampling.
pub fn realtime_batch_parts(
    models: &TrainedModels,
    dataset: &TransitionDataset,
    cfg: &AugmentConfig,
    batch_size: usize,
    rng: &mut ChaCha12Rng,
    env: Option<&EnvSpec>,
) -> Result<(Vec<SyntheticTransition>, Vec<Transition>)> {
    cfg.validate()?;
    let k_syn = match cfg.ablation {
        AblationKind::None => 0,
        _ => (cfg.synthetic_rate * batch_size as f64).round() as usize,
    };
    let mut synthetic = Vec::new();
    if k_syn > 0 {
        // Fresh per-call seed; drawn lazily so η = 0 stays stream-equal to
        // plain sampling.
        let call_seed: u64 = rng.random();
        synthetic = match cfg.ablation {
            AblationKind::Hipode | AblationKind::NoV => {
                let pool_size = pool_size_for(k_syn, cfg.selecting_rate);
                let (pool, _) = generate_pool_traced(models, dataset, cfg, pool_size, call_seed)?;
                select_smallest(&pool, k_syn)
            }
            AblationKind::Repeat => repeat_pool(&models.value, dataset, k_syn, call_seed)?,
            AblationKind::Noise(sigma) => {
                let spec = env.ok_or_else(|| {
                    Error::invalid("noise ablation needs the environment to re-step actions")
                })?;
                noise_replay(spec, dataset, k_syn, sigma, call_seed)?
            }
            AblationKind::None => unreachable!(),
        };
    }
    let real = dataset
        .sample_batch(batch_size - k_syn, rng)?
        .into_iter()
        .cloned()
        .collect();
    Ok((synthetic, real))
}

/// One mixed downstream-training batch, synthetic transitions first.
pub fn realtime_batch(
    models: &TrainedModels,
    dataset: &TransitionDataset,
    cfg: &AugmentConfig,
    batch_size: usize,
    rng: &mut ChaCha12Rng,
    env: Option<&EnvSpec>,
) -> Result<Vec<Transition>> {
    let (synthetic, real) = realtime_batch_parts(models, dataset, cfg, batch_size, rng, env)?;
    let mut batch: Vec<Transition> = synthetic.into_iter().map(|s| s.transition).collect();
    batch.extend(real);
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvae::{train_cvae, CvaeRole, CvaeTrainConfig};
    use crate::dynamics::{train_dynamics, DynamicsTrainConfig};
    use crate::envs::{collect, BehaviorPolicySpec, EnvSpec, ValueOracle};
    use crate::rng::substream;
    use crate::value::{train_value, NsConfig, ValueModel, ValueTrainConfig};
    use std::sync::OnceLock;

    fn synthetic_with_distance(d: f64, idx: usize) -> SyntheticTransition {
        SyntheticTransition {
            transition: Transition {
                state: vec![0.0],
                action: vec![0.0],
                reward: 0.0,
                next_state: vec![0.0],
                done: false,
            },
            source_state_index: idx,
            candidate_rank: 0,
            dynamics_distance: d,
        }
    }

    /// Brute-force reference: full sort of (distance, index) pairs, keep k
    /// lowest, return in pool order.
    fn filter_oracle(pool: &[SyntheticTransition], lambda: f64) -> Vec<usize> {
        let mut pairs: Vec<(f64, usize)> = pool
            .iter()
            .enumerate()
            .map(|(i, s)| (s.dynamics_distance, i))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = ((lambda * pool.len() as f64).floor() as usize).max(1);
        let mut keep: Vec<usize> = pairs.into_iter().take(k).map(|(_, i)| i).collect();
        keep.sort_unstable();
        keep
    }

    #[test]
    fn filter_keeps_everything_at_lambda_one() {
        let pool: Vec<SyntheticTransition> = [0.5, 0.1, 0.9, 0.3]
            .iter()
            .enumerate()
            .map(|(i, &d)| synthetic_with_distance(d, i))
            .collect();
        let out = filter_lambda(&pool, 1.0).unwrap();
        assert_eq!(out, pool);
    }

    #[test]
    fn filter_hand_example() {
        // distances [0.3, 0.1, 0.2, 0.4], λ = 0.5 -> the 0.1 and 0.2 items
        let pool: Vec<SyntheticTransition> = [0.3, 0.1, 0.2, 0.4]
            .iter()
            .enumerate()
            .map(|(i, &d)| synthetic_with_distance(d, i))
            .collect();
        let out = filter_lambda(&pool, 0.5).unwrap();
        let kept: Vec<usize> = out.iter().map(|s| s.source_state_index).collect();
        assert_eq!(kept, vec![1, 2]);
    }

    #[test]
    fn filter_lambda_point_two_keeps_exactly_two_of_ten() {
        let pool: Vec<SyntheticTransition> = (0..10)
            .map(|i| synthetic_with_distance(0.05 * i as f64, i))
            .collect();
        let out = filter_lambda(&pool, 0.2).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn filter_matches_brute_force_oracle_with_ties() {
        let mut rng = substream(100, "augment.test.filteroracle");
        for case in 0..300 {
            let len = rng.random_range(1..=120);
            let pool: Vec<SyntheticTransition> = (0..len)
                .map(|i| {
                    // coarse distances force plenty of exact ties
                    let d = (rng.random_range(0..8) as f64) * 0.125;
                    synthetic_with_distance(d, i)
                })
                .collect();
            for lambda in [0.1, 0.2, 0.5, 1.0] {
                let got: Vec<usize> = filter_lambda(&pool, lambda)
                    .unwrap()
                    .iter()
                    .map(|s| s.source_state_index)
                    .collect();
                let want = filter_oracle(&pool, lambda);
                assert_eq!(got, want, "case {case} lambda {lambda} len {len}");
            }
        }
    }

    #[test]
    fn pool_size_for_gives_exact_filter_counts() {
        for lambda in [0.1, 0.2, 0.25, 0.5, 0.7, 1.0] {
            for target in 1..200 {
                let p = pool_size_for(target, lambda);
                let k = ((lambda * p as f64).floor() as usize).max(1);
                assert!(k >= target, "lambda {lambda} target {target} pool {p} k {k}");
            }
        }
    }

    struct Fixture {
        spec: EnvSpec,
        dataset: TransitionDataset,
        models: TrainedModels,
    }

    /// One shared medium-grade fixture; trained small to keep tests quick.
    fn fixture() -> &'static Fixture {
        static FIXTURE: OnceLock<Fixture> = OnceLock::new();
        FIXTURE.get_or_init(|| {
            let spec = EnvSpec::pointmass2d();
            let dataset = collect(&spec, &BehaviorPolicySpec::medium(), 2000, 41).unwrap();
            let models = train_small_models(&dataset, 41);
            Fixture { spec, dataset, models }
        })
    }

    pub(super) fn train_small_models(dataset: &TransitionDataset, seed: u64) -> TrainedModels {
        let sd = dataset.state_dim();
        let ad = dataset.action_dim();
        let cvae_cfg = CvaeTrainConfig {
            epochs: 25,
            batch_size: 64,
            ..CvaeTrainConfig::default()
        };
        let mut rng = substream(seed, "augment.test.models");
        let mut state_cvae = CvaeModel::new(CvaeRole::StateTransition, sd, ad, 96, &mut rng).unwrap();
        train_cvae(&mut state_cvae, dataset, &cvae_cfg, &mut rng).unwrap();
        let mut action_cvae = CvaeModel::new(CvaeRole::InverseAction, sd, ad, 96, &mut rng).unwrap();
        train_cvae(&mut action_cvae, dataset, &cvae_cfg, &mut rng).unwrap();
        let mut reward_cvae = CvaeModel::new(CvaeRole::Reward, sd, ad, 96, &mut rng).unwrap();
        train_cvae(&mut reward_cvae, dataset, &cvae_cfg, &mut rng).unwrap();
        let mut value = ValueModel::new(sd, 96, 0.99, &mut rng).unwrap();
        train_value(
            &mut value,
            dataset,
            &NsConfig::default(),
            &ValueTrainConfig {
                steps: 2500,
                batch_size: 64,
                ..ValueTrainConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        let mut dynamics = crate::dynamics::DynamicsModel::new(sd, ad, 96, &mut rng).unwrap();
        train_dynamics(
            &mut dynamics,
            dataset,
            &DynamicsTrainConfig {
                steps: 2000,
                batch_size: 64,
                ..DynamicsTrainConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        TrainedModels {
            state_cvae,
            action_cvae,
            reward_cvae,
            value,
            dynamics,
        }
    }

    #[test]
    fn pool_has_exact_size_and_valid_provenance() {
        let fx = fixture();
        let cfg = AugmentConfig::default();
        let (pool, traces) =
            generate_pool_traced(&fx.models, &fx.dataset, &cfg, 64, cfg.seed).unwrap();
        assert_eq!(pool.len(), 64);
        for (item, trace) in pool.iter().zip(traces.iter()) {
            assert!(!item.transition.done);
            assert!(item.transition.action.iter().all(|a| (-1.0..=1.0).contains(a)));
            assert!(item.dynamics_distance >= 0.0);
            assert_eq!(trace.candidates.len(), cfg.candidate_count);
            assert_eq!(item.candidate_rank, trace.selected);
            // the stored next state is the denormalized selected candidate
            let denorm = fx.dataset.denormalize_state(&trace.candidates[trace.selected]);
            assert_eq!(item.transition.next_state, denorm);
            // source state is a dataset member
            assert_eq!(
                item.transition.state,
                fx.dataset.get(item.source_state_index).state
            );
        }
    }

    #[test]
    fn pool_generation_is_deterministic() {
        let fx = fixture();
        let cfg = AugmentConfig::default();
        let a = generate_pool(&fx.models, &fx.dataset, &cfg, 32).unwrap();
        let b = generate_pool(&fx.models, &fx.dataset, &cfg, 32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn selection_lifts_oracle_value_over_candidate_average() {
        let fx = fixture();
        let cfg = AugmentConfig::default();
        let (pool, traces) =
            generate_pool_traced(&fx.models, &fx.dataset, &cfg, 256, cfg.seed).unwrap();
        let oracle = ValueOracle::new(fx.spec.clone(), 0.99);
        let mut selected_sum = 0.0;
        let mut all_sum = 0.0;
        let mut all_n = 0usize;
        for (item, trace) in pool.iter().zip(traces.iter()) {
            selected_sum += oracle.value(&item.transition.next_state);
            for c in &trace.candidates {
                all_sum += oracle.value(&fx.dataset.denormalize_state(c));
                all_n += 1;
            }
        }
        let selected_mean = selected_sum / pool.len() as f64;
        let all_mean = all_sum / all_n as f64;
        assert!(
            selected_mean >= all_mean,
            "selected {selected_mean} vs candidate average {all_mean}"
        );
    }

    #[test]
    fn nov_with_one_candidate_equals_hipode() {
        let fx = fixture();
        let base = AugmentConfig {
            candidate_count: 1,
            ..AugmentConfig::default()
        };
        let hip = generate_pool(&fx.models, &fx.dataset, &base, 24).unwrap();
        let nov_cfg = AugmentConfig {
            ablation: AblationKind::NoV,
            ..base
        };
        let nov = generate_pool(&fx.models, &fx.dataset, &nov_cfg, 24).unwrap();
        assert_eq!(hip, nov);
    }

    #[test]
    fn hipode_and_nov_share_sources_and_candidates() {
        let fx = fixture();
        let cfg = AugmentConfig::default();
        let (hip, hip_traces) =
            generate_pool_traced(&fx.models, &fx.dataset, &cfg, 48, cfg.seed).unwrap();
        let nov_cfg = AugmentConfig {
            ablation: AblationKind::NoV,
            ..cfg
        };
        let (nov, nov_traces) =
            generate_pool_traced(&fx.models, &fx.dataset, &nov_cfg, 48, nov_cfg.seed).unwrap();
        for i in 0..48 {
            assert_eq!(hip[i].source_state_index, nov[i].source_state_index);
            assert_eq!(hip_traces[i].candidates, nov_traces[i].candidates);
        }
        // the two strategies differ (only) in how the winning rank is drawn
        let hip_ranks: Vec<usize> = hip.iter().map(|s| s.candidate_rank).collect();
        let nov_ranks: Vec<usize> = nov.iter().map(|s| s.candidate_rank).collect();
        assert_ne!(hip_ranks, nov_ranks);
    }

    #[test]
    fn offline_merge_counts_and_eta_zero_identity() {
        let fx = fixture();
        let cfg = AugmentConfig {
            synthetic_rate: 0.1,
            ..AugmentConfig::default()
        };
        let out = augment_offline(&fx.models, &fx.dataset, &cfg, Some(&fx.spec)).unwrap();
        assert_eq!(out.synthetic.len(), 200); // floor(0.1 * 2000)
        assert_eq!(out.merged.len(), 2200);
        assert!(out.synthetic.iter().all(|s| !s.transition.done));

        let zero = AugmentConfig {
            synthetic_rate: 0.0,
            ..AugmentConfig::default()
        };
        let out = augment_offline(&fx.models, &fx.dataset, &zero, Some(&fx.spec)).unwrap();
        assert_eq!(out.merged.len(), fx.dataset.len());
        assert!(out.synthetic.is_empty());
        assert_eq!(out.merged.transitions(), fx.dataset.transitions());
    }

    #[test]
    fn repeat_outputs_are_dataset_members() {
        let fx = fixture();
        let pool = repeat_pool(&fx.models.value, &fx.dataset, 100, 3).unwrap();
        assert_eq!(pool.len(), 100);
        for s in &pool {
            assert_eq!(&s.transition, fx.dataset.get(s.source_state_index));
        }
    }

    #[test]
    fn replay_modes_restep_through_the_true_environment() {
        let fx = fixture();
        let noisy = noise_replay(&fx.spec, &fx.dataset, 50, 0.1, 7).unwrap();
        let quality = quality_replay(&fx.spec, &fx.dataset, 50, 7).unwrap();
        let oracle = ValueOracle::new(fx.spec.clone(), 0.99);
        for s in noisy.iter().chain(quality.iter()) {
            assert!(!s.transition.done);
            // re-stepped transitions are real: reward matches the env step
            let stepped = step(&fx.spec, &s.transition.state, &s.transition.action, 0);
            assert_eq!(stepped.next_state, s.transition.next_state);
            assert_eq!(stepped.reward, s.transition.reward);
        }
        // expert actions should not be worse on average than noisy ones
        let q_mean: f64 = quality
            .iter()
            .map(|s| s.transition.reward + oracle.value(&s.transition.next_state))
            .sum::<f64>()
            / 50.0;
        let n_mean: f64 = noisy
            .iter()
            .map(|s| s.transition.reward + oracle.value(&s.transition.next_state))
            .sum::<f64>()
            / 50.0;
        assert!(q_mean >= n_mean, "quality {q_mean} vs noisy {n_mean}");
    }

    #[test]
    fn realtime_batch_counts_match_hand_arithmetic() {
        let fx = fixture();
        let cfg = AugmentConfig {
            mode: AugmentMode::Realtime,
            ..AugmentConfig::default()
        };
        // η = 0.2, N = 256 -> 51 synthetic + 205 real
        let mut rng = substream(4, "augment.test.rt");
        let batch = realtime_batch(&fx.models, &fx.dataset, &cfg, 256, &mut rng, None).unwrap();
        assert_eq!(batch.len(), 256);
        let synthetic = batch.iter().filter(|t| !is_member(&fx.dataset, t)).count();
        // all 51 generated items are non-members with probability ~1; real
        // draws are members by construction
        assert_eq!(synthetic, 51);
    }

    fn is_member(ds: &TransitionDataset, t: &Transition) -> bool {
        ds.transitions().iter().any(|x| x == t)
    }

    #[test]
    fn realtime_eta_zero_is_stream_equal_to_plain_sampling() {
        let fx = fixture();
        let cfg = AugmentConfig {
            synthetic_rate: 0.0,
            mode: AugmentMode::Realtime,
            ..AugmentConfig::default()
        };
        let mut rng_a = substream(9, "augment.test.rt0");
        let batch = realtime_batch(&fx.models, &fx.dataset, &cfg, 64, &mut rng_a, None).unwrap();
        let mut rng_b = substream(9, "augment.test.rt0");
        let plain: Vec<Transition> = fx
            .dataset
            .sample_batch(64, &mut rng_b)
            .unwrap()
            .into_iter()
            .cloned()
            .collect();
        assert_eq!(batch, plain);
    }

    #[test]
    fn realtime_batches_are_reproducible() {
        let fx = fixture();
        let cfg = AugmentConfig {
            mode: AugmentMode::Realtime,
            ..AugmentConfig::default()
        };
        let a = realtime_batch(&fx.models, &fx.dataset, &cfg, 40, &mut substream(5, "rt"), None)
            .unwrap();
        let b = realtime_batch(&fx.models, &fx.dataset, &cfg, 40, &mut substream(5, "rt"), None)
            .unwrap();
        assert_eq!(a, b);
    }
}
