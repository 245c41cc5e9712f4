//! Self-contained desk-scale environments and scripted behavior policies.
//!
//! Two environments, both goal-reaching with dense negative-distance
//! reward on the box `[-1, 1]^d`:
//!
//! * `pointmass2d` — position control in the plane; the main benchmark.
//! * `chain1d` — one-dimensional twin used to cross-check the analytic
//!   value oracle against grid value iteration.
//!
//! Behavior policies of graded quality (`random`, `medium`, `expert`, and
//! `noisy(σ)`) synthesize datasets whose mean episode return is strictly
//! ordered, which is what makes "quality" and "diversity" of augmented
//! data separable at desk scale.

use crate::data::{Transition, TransitionDataset};
use crate::error::{Error, Result};
use crate::rng::indexed_substream;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    Pointmass2d,
    Chain1d,
}

impl EnvName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pointmass2d" => Ok(EnvName::Pointmass2d),
            "chain1d" => Ok(EnvName::Chain1d),
            other => Err(Error::invalid(format!("unknown environment `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvName::Pointmass2d => "pointmass2d",
            EnvName::Chain1d => "chain1d",
        }
    }
}

/// Environment parameters. States live in `[-1, 1]^state_dim`; a step moves
/// the position by `action_scale * a` (clipped back into bounds) and pays
/// the negative Euclidean distance of the *next* state to the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: EnvName,
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub goal: Vec<f64>,
    pub action_scale: f64,
}

impl EnvSpec {
    pub fn pointmass2d() -> Self {
        EnvSpec {
            name: EnvName::Pointmass2d,
            state_dim: 2,
            action_dim: 2,
            horizon: 50,
            goal: vec![0.8, 0.8],
            action_scale: 0.1,
        }
    }

    pub fn chain1d() -> Self {
        EnvSpec {
            name: EnvName::Chain1d,
            state_dim: 1,
            action_dim: 1,
            horizon: 50,
            goal: vec![0.8],
            action_scale: 0.1,
        }
    }

    pub fn by_name(name: EnvName) -> Self {
        match name {
            EnvName::Pointmass2d => Self::pointmass2d(),
            EnvName::Chain1d => Self::chain1d(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if self.action_scale <= 0.0 {
            return Err(Error::invalid("action_scale must be positive"));
        }
        if self.goal.len() != self.state_dim {
            return Err(Error::DimMismatch {
                context: "env goal",
                expected: self.state_dim,
                actual: self.goal.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// One environment step at step index `t` (0-based within the episode).
/// Out-of-range actions are clipped and logged; `done` is purely the time
/// limit `t + 1 == horizon`.
pub fn step(spec: &EnvSpec, state: &[f64], action: &[f64], t: usize) -> StepOutcome {
    assert_eq!(state.len(), spec.state_dim, "step: state dim");
    assert_eq!(action.len(), spec.action_dim, "step: action dim");
    let mut clipped = false;
    let mut next_state = vec![0.0; spec.state_dim];
    for i in 0..spec.state_dim {
        let mut a = action[i];
        if !(-1.0..=1.0).contains(&a) {
            a = a.clamp(-1.0, 1.0);
            clipped = true;
        }
        next_state[i] = (state[i] + spec.action_scale * a).clamp(-1.0, 1.0);
    }
    if clipped {
        log::warn!("action out of [-1,1] clipped: {action:?}");
    }
    let reward = -distance(&next_state, &spec.goal);
    StepOutcome {
        next_state,
        reward,
        done: t + 1 >= spec.horizon,
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    Medium,
    Expert,
    Noisy,
}

/// A scripted behavior policy. `noise_scale` is only meaningful for
/// `Noisy`; the `Medium` grade uses a fixed internal scale of 0.3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicySpec {
    pub kind: PolicyKind,
    pub noise_scale: f64,
}

const MEDIUM_NOISE: f64 = 0.3;

impl BehaviorPolicySpec {
    pub fn random() -> Self {
        BehaviorPolicySpec { kind: PolicyKind::Random, noise_scale: 0.0 }
    }

    pub fn medium() -> Self {
        BehaviorPolicySpec { kind: PolicyKind::Medium, noise_scale: 0.0 }
    }

    pub fn expert() -> Self {
        BehaviorPolicySpec { kind: PolicyKind::Expert, noise_scale: 0.0 }
    }

    pub fn noisy(noise_scale: f64) -> Result<Self> {
        if noise_scale < 0.0 {
            return Err(Error::invalid("noise_scale must be non-negative"));
        }
        Ok(BehaviorPolicySpec { kind: PolicyKind::Noisy, noise_scale })
    }

    pub fn tag(&self) -> String {
        match self.kind {
            PolicyKind::Random => "random".into(),
            PolicyKind::Medium => "medium".into(),
            PolicyKind::Expert => "expert".into(),
            PolicyKind::Noisy => format!("noisy-{:.3}", self.noise_scale),
        }
    }
}

/// Straight-line goal-seeking controller: move distance
/// `min(action_scale, ||goal - s||)` directly toward the goal. Serves as
/// both the expert behavior policy and the basis of the analytic value
/// oracle, so the two agree by construction.
pub fn expert_action(spec: &EnvSpec, state: &[f64]) -> Vec<f64> {
    let d = distance(state, &spec.goal);
    if d < 1e-12 {
        return vec![0.0; spec.action_dim];
    }
    let step_len = d.min(spec.action_scale);
    spec.goal
        .iter()
        .zip(state.iter())
        .map(|(g, s)| (g - s) / d * (step_len / spec.action_scale))
        .collect()
}

/// Draw an action from a behavior policy.
pub fn policy_action(
    policy: &BehaviorPolicySpec,
    spec: &EnvSpec,
    state: &[f64],
    rng: &mut ChaCha12Rng,
) -> Vec<f64> {
    match policy.kind {
        PolicyKind::Random => (0..spec.action_dim)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect(),
        PolicyKind::Expert => expert_action(spec, state),
        PolicyKind::Medium => noisy_expert(spec, state, MEDIUM_NOISE, rng),
        PolicyKind::Noisy => noisy_expert(spec, state, policy.noise_scale, rng),
    }
}

fn noisy_expert(spec: &EnvSpec, state: &[f64], sigma: f64, rng: &mut ChaCha12Rng) -> Vec<f64> {
    expert_action(spec, state)
        .into_iter()
        .map(|a| {
            let e: f64 = rng.sample(StandardNormal);
            (a + sigma * e).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Roll seeded episodes with a behavior policy until exactly
/// `n_transitions` transitions are collected.
pub fn collect(
    spec: &EnvSpec,
    policy: &BehaviorPolicySpec,
    n_transitions: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    spec.validate()?;
    if n_transitions < spec.horizon {
        return Err(Error::invalid(format!(
            "n_transitions ({n_transitions}) must be >= horizon ({})",
            spec.horizon
        )));
    }
    let mut transitions = Vec::with_capacity(n_transitions);
    let mut episode = 0u64;
    while transitions.len() < n_transitions {
        let mut rng = indexed_substream(seed, "envs.collect.episode", episode);
        let mut state: Vec<f64> = (0..spec.state_dim)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        for t in 0..spec.horizon {
            let action = policy_action(policy, spec, &state, &mut rng);
            let out = step(spec, &state, &action, t);
            transitions.push(Transition {
                state: state.clone(),
                action,
                reward: out.reward,
                next_state: out.next_state.clone(),
                done: out.done,
            });
            state = out.next_state;
            if transitions.len() == n_transitions {
                break;
            }
            if out.done {
                break;
            }
        }
        episode += 1;
    }
    TransitionDataset::new(transitions, policy.tag())
}

/// Medium-replay analog: an even mixture of random-grade and medium-grade
/// experience, standing in for the replay buffer of an agent trained up to
/// medium quality.
pub fn collect_replay_analog(
    spec: &EnvSpec,
    n_transitions: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    let half = n_transitions / 2;
    let random = collect(spec, &BehaviorPolicySpec::random(), half.max(spec.horizon), seed)?;
    let medium = collect(
        spec,
        &BehaviorPolicySpec::medium(),
        (n_transitions - half).max(spec.horizon),
        seed.wrapping_add(1),
    )?;
    let mut transitions = random.transitions().to_vec();
    transitions.extend_from_slice(medium.transitions());
    transitions.truncate(n_transitions);
    TransitionDataset::new(transitions, "medium-replay")
}

/// Sum of rewards of each *complete* episode (split on the done flag).
pub fn complete_episode_returns(dataset: &TransitionDataset) -> Vec<f64> {
    let mut returns = Vec::new();
    let mut acc = 0.0;
    for t in dataset.transitions() {
        acc += t.reward;
        if t.done {
            returns.push(acc);
            acc = 0.0;
        }
    }
    returns
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Ground-truth optimal value stand-in, used for analysis only.
///
/// For `pointmass2d` the value of the straight-line controller has a
/// closed form as a function of the distance to the goal (the controller
/// shrinks that distance by `action_scale` each step). For `chain1d` the
/// value comes from fine-grid value iteration, cross-checked against the
/// same closed form in tests.
#[derive(Debug, Clone)]
pub struct ValueOracle {
    spec: EnvSpec,
    discount: f64,
    chain_table: Option<Vec<f64>>,
    chain_cells: usize,
}

pub const ORACLE_CHAIN_CELLS: usize = 401;
pub const ORACLE_CHAIN_ACTIONS: usize = 41;

impl ValueOracle {
    pub fn new(spec: EnvSpec, discount: f64) -> Self {
        assert!((0.0..1.0).contains(&discount), "discount in (0,1)");
        let chain_table = match spec.name {
            EnvName::Chain1d => Some(chain_value_iteration(
                &spec,
                ORACLE_CHAIN_CELLS,
                ORACLE_CHAIN_ACTIONS,
                discount,
                1e-12,
            )),
            EnvName::Pointmass2d => None,
        };
        ValueOracle { spec, discount, chain_table, chain_cells: ORACLE_CHAIN_CELLS }
    }

    pub fn value(&self, state: &[f64]) -> f64 {
        match &self.chain_table {
            None => straight_line_value(&self.spec, state, self.discount),
            Some(table) => interp_grid(table, self.chain_cells, state[0]),
        }
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }
}

/// Discounted return of the straight-line controller from `state`.
pub fn straight_line_value(spec: &EnvSpec, state: &[f64], discount: f64) -> f64 {
    let mut d = distance(state, &spec.goal);
    let mut value = 0.0;
    let mut disc = 1.0;
    while d > 0.0 {
        d = (d - spec.action_scale).max(0.0);
        value += disc * (-d);
        disc *= discount;
    }
    value
}

/// One-shot oracle evaluation; prefer [`ValueOracle`] inside loops so the
/// chain1d table is built once.
pub fn oracle_value(spec: &EnvSpec, state: &[f64], discount: f64) -> f64 {
    ValueOracle::new(spec.clone(), discount).value(state)
}

/// Fine-grid value iteration for `chain1d`: `cells` grid points over
/// `[-1, 1]`, `n_actions` discrete action levels, linear interpolation of
/// the value at the next state. Iterates to sup-norm tolerance `tol`.
pub fn chain_value_iteration(
    spec: &EnvSpec,
    cells: usize,
    n_actions: usize,
    discount: f64,
    tol: f64,
) -> Vec<f64> {
    assert!(cells >= 2 && n_actions >= 2);
    let xs: Vec<f64> = (0..cells)
        .map(|i| -1.0 + 2.0 * i as f64 / (cells - 1) as f64)
        .collect();
    let actions: Vec<f64> = (0..n_actions)
        .map(|i| -1.0 + 2.0 * i as f64 / (n_actions - 1) as f64)
        .collect();
    let mut v = vec![0.0; cells];
    loop {
        let mut next = vec![0.0; cells];
        let mut max_change: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for &a in &actions {
                let x2 = (x + spec.action_scale * a).clamp(-1.0, 1.0);
                let r = -(x2 - spec.goal[0]).abs();
                let q = r + discount * interp_grid(&v, cells, x2);
                best = best.max(q);
            }
            next[i] = best;
            max_change = max_change.max((next[i] - v[i]).abs());
        }
        v = next;
        if max_change < tol {
            return v;
        }
    }
}

/// Sup-norm Bellman residual of a value table under the same discretized
/// operator used by [`chain_value_iteration`].
pub fn chain_bellman_residual(
    spec: &EnvSpec,
    v: &[f64],
    n_actions: usize,
    discount: f64,
) -> f64 {
    let cells = v.len();
    let xs: Vec<f64> = (0..cells)
        .map(|i| -1.0 + 2.0 * i as f64 / (cells - 1) as f64)
        .collect();
    let actions: Vec<f64> = (0..n_actions)
        .map(|i| -1.0 + 2.0 * i as f64 / (n_actions - 1) as f64)
        .collect();
    let mut worst: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for &a in &actions {
            let x2 = (x + spec.action_scale * a).clamp(-1.0, 1.0);
            let r = -(x2 - spec.goal[0]).abs();
            best = best.max(r + discount * interp_grid(v, cells, x2));
        }
        worst = worst.max((best - v[i]).abs());
    }
    worst
}

fn interp_grid(v: &[f64], cells: usize, x: f64) -> f64 {
    let pos = (x.clamp(-1.0, 1.0) + 1.0) / 2.0 * (cells - 1) as f64;
    let lo = (pos.floor() as usize).min(cells - 1);
    let hi = (lo + 1).min(cells - 1);
    let frac = pos - lo as f64;
    v[lo] * (1.0 - frac) + v[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn null_action_keeps_state_and_pays_distance() {
        let spec = EnvSpec::pointmass2d();
        let s = [0.2, -0.3];
        let out = step(&spec, &s, &[0.0, 0.0], 0);
        assert_eq!(out.next_state, s.to_vec());
        let want = -distance(&s, &spec.goal);
        assert!((out.reward - want).abs() < 1e-15);
        assert!(!out.done);
    }

    #[test]
    fn reward_is_zero_at_goal() {
        let spec = EnvSpec::pointmass2d();
        let out = step(&spec, &spec.goal.clone(), &[0.0, 0.0], 3);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn hand_computed_step() {
        // s=(0,0), goal=(1,0), scale=0.1, a=(1,0) -> s'=(0.1,0), r=-0.9
        let spec = EnvSpec {
            name: EnvName::Pointmass2d,
            state_dim: 2,
            action_dim: 2,
            horizon: 50,
            goal: vec![1.0, 0.0],
            action_scale: 0.1,
        };
        let out = step(&spec, &[0.0, 0.0], &[1.0, 0.0], 0);
        assert!((out.next_state[0] - 0.1).abs() < 1e-15);
        assert_eq!(out.next_state[1], 0.0);
        assert!((out.reward - (-0.9)).abs() < 1e-12);
    }

    #[test]
    fn done_fires_exactly_at_horizon() {
        let spec = EnvSpec::pointmass2d();
        let out = step(&spec, &[0.0, 0.0], &[0.0, 0.0], spec.horizon - 1);
        assert!(out.done);
        let out = step(&spec, &[0.0, 0.0], &[0.0, 0.0], spec.horizon - 2);
        assert!(!out.done);
    }

    #[test]
    fn out_of_range_action_is_clipped() {
        let spec = EnvSpec::pointmass2d();
        let out = step(&spec, &[0.0, 0.0], &[4.0, -4.0], 0);
        assert!((out.next_state[0] - 0.1).abs() < 1e-15);
        assert!((out.next_state[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn collect_returns_exact_count_and_is_reproducible() {
        let spec = EnvSpec::pointmass2d();
        let ds1 = collect(&spec, &BehaviorPolicySpec::medium(), 137, 9).unwrap();
        let ds2 = collect(&spec, &BehaviorPolicySpec::medium(), 137, 9).unwrap();
        assert_eq!(ds1.len(), 137);
        assert_eq!(ds1.transitions(), ds2.transitions());
    }

    #[test]
    fn random_policy_actions_have_near_zero_mean() {
        let spec = EnvSpec::pointmass2d();
        let ds = collect(&spec, &BehaviorPolicySpec::random(), 5000, 3).unwrap();
        // Var of U(-1,1) = 1/3; 3 sigma bound on the mean of 5000 draws.
        let bound = 3.0 * (1.0f64 / 3.0).sqrt() / (5000f64).sqrt();
        for c in 0..spec.action_dim {
            let m = mean(&ds.transitions().iter().map(|t| t.action[c]).collect::<Vec<_>>());
            assert!(m.abs() < bound, "component {c} mean {m} vs bound {bound}");
        }
    }

    #[test]
    fn expert_reaches_goal_within_horizon_from_anywhere() {
        let spec = EnvSpec::pointmass2d();
        let mut rng = substream(21, "envs.test.expert");
        for _ in 0..50 {
            let mut s: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..=1.0)).collect();
            for t in 0..spec.horizon {
                let a = expert_action(&spec, &s);
                assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
                s = step(&spec, &s, &a, t).next_state;
            }
            assert!(
                distance(&s, &spec.goal) < 2.0 * spec.action_scale,
                "expert ended {s:?}"
            );
        }
    }

    #[test]
    fn grade_ordering_expert_medium_random() {
        let spec = EnvSpec::pointmass2d();
        for seed in 0..5u64 {
            let e = collect(&spec, &BehaviorPolicySpec::expert(), 1000, seed).unwrap();
            let m = collect(&spec, &BehaviorPolicySpec::medium(), 1000, seed).unwrap();
            let r = collect(&spec, &BehaviorPolicySpec::random(), 1000, seed).unwrap();
            let (re, rm, rr) = (
                mean(&complete_episode_returns(&e)),
                mean(&complete_episode_returns(&m)),
                mean(&complete_episode_returns(&r)),
            );
            assert!(re > rm && rm > rr, "seed {seed}: {re} {rm} {rr}");
        }
    }

    #[test]
    fn oracle_is_zero_at_goal_and_monotone_in_distance() {
        let spec = EnvSpec::pointmass2d();
        let oracle = ValueOracle::new(spec.clone(), 0.99);
        assert_eq!(oracle.value(&spec.goal.clone()), 0.0);

        let mut rng = substream(22, "envs.test.monotone");
        for _ in 0..200 {
            let s1: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let s2: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let (d1, d2) = (distance(&s1, &spec.goal), distance(&s2, &spec.goal));
            let (v1, v2) = (oracle.value(&s1), oracle.value(&s2));
            if d1 < d2 {
                assert!(v1 >= v2, "d1={d1} v1={v1} d2={d2} v2={v2}");
            } else if d2 < d1 {
                assert!(v2 >= v1);
            }
        }
    }

    #[test]
    fn chain_value_iteration_is_a_bellman_fixed_point() {
        let spec = EnvSpec::chain1d();
        // The 11-cell variant from the module contract, plus the
        // production grid.
        for cells in [11usize, ORACLE_CHAIN_CELLS] {
            let v = chain_value_iteration(&spec, cells, ORACLE_CHAIN_ACTIONS, 0.99, 1e-12);
            let residual = chain_bellman_residual(&spec, &v, ORACLE_CHAIN_ACTIONS, 0.99);
            assert!(residual < 1e-8, "cells={cells} residual={residual}");
        }
    }

    #[test]
    fn chain_oracle_matches_straight_line_closed_form() {
        let spec = EnvSpec::chain1d();
        let oracle = ValueOracle::new(spec.clone(), 0.99);
        for &x in &[-0.9, -0.4, 0.0, 0.25, 0.6, 0.8, 0.95] {
            let vi = oracle.value(&[x]);
            let analytic = straight_line_value(&spec, &[x], 0.99);
            assert!(
                (vi - analytic).abs() < 2e-2,
                "x={x}: vi={vi} analytic={analytic}"
            );
        }
    }

    #[test]
    fn replay_analog_mixes_grades() {
        let spec = EnvSpec::pointmass2d();
        let ds = collect_replay_analog(&spec, 400, 5).unwrap();
        assert_eq!(ds.len(), 400);
        assert_eq!(ds.source_tag(), "medium-replay");
    }
}
