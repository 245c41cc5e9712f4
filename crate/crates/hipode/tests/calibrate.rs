//! Manual calibration probes (run with `--ignored --nocapture`).
//! Not part of the test suite; used to size training budgets.

use hipode::analysis::normalization_anchors;
use hipode::config::RunConfig;
use hipode::envs::EnvSpec;
use hipode::pipeline::{obtain_dataset, run_seed, train_models};
use hipode::policy::{evaluate, train_policy, Controller, DataSource};
use std::time::Instant;

fn probe_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.n_transitions = 4000;
    cfg.seeds = vec![0, 1];
    cfg
}

#[test]
#[ignore]
fn timing_one_policy_training() {
    let cfg = probe_config();
    let dataset = obtain_dataset(&cfg).unwrap();
    let t0 = Instant::now();
    let (policy, _) = train_policy(
        &DataSource::Offline(&dataset),
        &cfg.policy_config(),
        &cfg.policy_train_config(),
        0,
    )
    .unwrap();
    let train_time = t0.elapsed();
    let spec = cfg.env_spec();
    let eval = evaluate(&Controller::Learned(&policy), &spec, 10, 0).unwrap();
    let anchors = normalization_anchors(&spec, 20, 0).unwrap();
    println!(
        "policy training ({} steps, batch {}): {:?}; return {:.3}, score {:.2}",
        cfg.policy_steps,
        cfg.policy_batch,
        train_time,
        eval.mean,
        anchors.normalized_score(eval.mean)
    );
}

#[test]
#[ignore]
fn timing_model_suite() {
    let cfg = probe_config();
    let dataset = obtain_dataset(&cfg).unwrap();
    let t0 = Instant::now();
    let (_models, reports) = train_models(&dataset, &cfg, 0).unwrap();
    println!(
        "model suite: {:?} (heldout mse: state {:.2e} action {:.2e} reward {:.2e})",
        t0.elapsed(),
        reports.state_cvae.heldout_mse,
        reports.action_cvae.heldout_mse,
        reports.reward_cvae.heldout_mse
    );
}

#[test]
#[ignore]
fn directional_baseline_vs_hipode() {
    for grade in ["medium", "random"] {
        for (label, ablation, eta) in [
            ("baseline", "none", 0.0),
            ("hipode", "hipode", if grade == "random" { 0.7 } else { 0.2 }),
            ("nov", "nov", if grade == "random" { 0.7 } else { 0.2 }),
        ] {
            let mut cfg = probe_config();
            cfg.grade = grade.into();
            cfg.ablation = ablation.into();
            cfg.eta = eta;
            let dataset = obtain_dataset(&cfg).unwrap();
            let spec = EnvSpec::pointmass2d();
            let anchors = normalization_anchors(&spec, 20, 0).unwrap();
            let t0 = Instant::now();
            let mut scores = Vec::new();
            for &seed in &cfg.seeds {
                let art = run_seed(&cfg, &dataset, seed, None).unwrap();
                let sc = anchors.normalized_score(art.outcome.mean_return);
                println!("{grade:>7} {label:>9} seed {seed}: score {sc:.2} ({:?})", t0.elapsed());
                scores.push(sc);
            }
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            println!("{grade:>7} {label:>9}: MEAN {mean:.2}");
        }
    }
}

#[test]
#[ignore]
fn directional_quality_vs_diversity() {
    let mut cfg = probe_config();
    cfg.grade = "medium".into();
    cfg.eta = 0.3;
    cfg.seeds = vec![0, 1];
    let t0 = Instant::now();
    let report = hipode::pipeline::suite_quality_vs_diversity(&cfg, vec![]).unwrap();
    println!("{}", report.table());
    println!("suite took {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn density_shift_probe() {
    use hipode::analysis::analyze_density;
    use hipode::augment::augment_offline;
    let mut cfg = probe_config();
    cfg.grade = "medium-replay".into();
    cfg.eta = 0.2;
    let dataset = obtain_dataset(&cfg).unwrap();
    let spec = EnvSpec::pointmass2d();
    for seed in [0u64, 1] {
        let t0 = Instant::now();
        let (models, _) = train_models(&dataset, &cfg, seed).unwrap();
        let out = augment_offline(&models, &dataset, &cfg.augment_config(seed), Some(&spec)).unwrap();
        let transitions: Vec<_> = out.synthetic.iter().map(|s| s.transition.clone()).collect();
        let d = analyze_density(&dataset, &transitions, &spec, 0.99, 24).unwrap();
        println!(
            "seed {seed}: synthetic mean {:.4} vs real mean {:.4} (margin {:+.4}) ({:?})",
            d.synthetic_mean,
            d.real_mean,
            d.synthetic_mean - d.real_mean,
            t0.elapsed()
        );
    }
}
