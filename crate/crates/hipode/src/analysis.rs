//! Analysis utilities: oracle-value density comparison between real and
//! synthetic data, and locally computed score normalization anchors.

use crate::data::{Transition, TransitionDataset};
use crate::envs::{collect, complete_episode_returns, mean, BehaviorPolicySpec, EnvSpec, ValueOracle};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Mean episode returns of the random and expert behavior policies,
/// used to normalize raw returns onto a 0–100 scale the way benchmark
/// scores usually are.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Anchors {
    pub random_return: f64,
    pub expert_return: f64,
}

pub fn normalization_anchors(spec: &EnvSpec, episodes: usize, seed: u64) -> Result<Anchors> {
    let n = episodes.max(1) * spec.horizon;
    let random = collect(spec, &BehaviorPolicySpec::random(), n, seed)?;
    let expert = collect(spec, &BehaviorPolicySpec::expert(), n, seed)?;
    Ok(Anchors {
        random_return: mean(&complete_episode_returns(&random)),
        expert_return: mean(&complete_episode_returns(&expert)),
    })
}

impl Anchors {
    /// 0 is random-policy performance, 100 is the expert controller.
    pub fn normalized_score(&self, ret: f64) -> f64 {
        100.0 * (ret - self.random_return) / (self.expert_return - self.random_return)
    }
}

/// Binned densities of `r + V*(s')` for real and synthetic transitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityReport {
    pub metric: String,
    pub bin_count: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub bin_edges: Vec<f64>,
    pub real_counts: Vec<usize>,
    pub synthetic_counts: Vec<usize>,
    pub real_mean: f64,
    pub real_median: f64,
    pub synthetic_mean: f64,
    pub synthetic_median: f64,
}

fn median(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Histogram the oracle-value metric over the real dataset and a synthetic
/// set, on shared bins spanning both.
pub fn analyze_density(
    dataset: &TransitionDataset,
    synthetic: &[Transition],
    spec: &EnvSpec,
    discount: f64,
    bin_count: usize,
) -> Result<DensityReport> {
    if bin_count == 0 {
        return Err(Error::invalid("bin_count must be >= 1"));
    }
    let oracle = ValueOracle::new(spec.clone(), discount);
    let metric = |t: &Transition| t.reward + oracle.value(&t.next_state);

    let mut real: Vec<f64> = dataset.transitions().iter().map(metric).collect();
    let mut synth: Vec<f64> = synthetic.iter().map(metric).collect();

    let lo = real
        .iter()
        .chain(synth.iter())
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = real
        .iter()
        .chain(synth.iter())
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let span = (hi - lo).max(1e-12);
    let edges: Vec<f64> = (0..=bin_count)
        .map(|i| lo + span * i as f64 / bin_count as f64)
        .collect();
    let bin_of = |x: f64| (((x - lo) / span * bin_count as f64) as usize).min(bin_count - 1);

    let mut real_counts = vec![0usize; bin_count];
    for &x in &real {
        real_counts[bin_of(x)] += 1;
    }
    let mut synthetic_counts = vec![0usize; bin_count];
    for &x in &synth {
        synthetic_counts[bin_of(x)] += 1;
    }

    real.sort_by(f64::total_cmp);
    synth.sort_by(f64::total_cmp);
    Ok(DensityReport {
        metric: "reward + oracle_value(next_state)".into(),
        bin_count,
        bin_lo: lo,
        bin_hi: hi,
        bin_edges: edges,
        real_mean: mean(&real),
        real_median: median(&real),
        synthetic_mean: mean(&synth),
        synthetic_median: median(&synth),
        real_counts,
        synthetic_counts,
    })
}
