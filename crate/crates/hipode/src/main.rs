//! Command-line entry point: dataset collection, model training,
//! augmentation, downstream policy training, evaluation, density analysis,
//! the full pipeline, and the experiment suites.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hipode::analysis::{analyze_density, normalization_anchors};
use hipode::augment::{augment_offline, AugmentConfig, TrainedModels};
use hipode::config::RunConfig;
use hipode::cvae::CvaeModel;
use hipode::data::TransitionDataset;
use hipode::dynamics::DynamicsModel;
use hipode::envs::collect_replay_analog;
use hipode::pipeline::{
    collect_dataset, pipeline, suite_ablation_grid, suite_quality_vs_diversity, train_models,
    write_json,
};
use hipode::policy::{evaluate, train_policy, ActorCritic, Controller, DataSource};
use hipode::value::ValueModel;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "hipode",
    version,
    about = "Policy-decoupled data augmentation for offline RL on desk-scale environments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by subcommands that read a run config.
#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file (TOML). Flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment name (pointmass2d | chain1d).
    #[arg(long)]
    env: Option<String>,
    /// Dataset grade (random | medium | expert | medium-replay | noisy:S).
    #[arg(long)]
    grade: Option<String>,
    /// Synthetic rate η in [0, 1).
    #[arg(long)]
    eta: Option<f64>,
    /// Selecting rate λ in (0, 1].
    #[arg(long = "lambda")]
    lambda: Option<f64>,
    /// Candidate next states per source state.
    #[arg(long = "n")]
    candidates: Option<usize>,
    /// Negative-sampling penalty weight α.
    #[arg(long)]
    alpha: Option<f64>,
    /// Negative-sampling penalty scope σ.
    #[arg(long)]
    sigma: Option<f64>,
    /// Generation mode (offline_merge | realtime).
    #[arg(long)]
    mode: Option<String>,
    /// Generation strategy (hipode | nov | repeat | noise:S | none).
    #[arg(long)]
    ablation: Option<String>,
    /// Seeds for the run (comma separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Downstream policy gradient steps.
    #[arg(long)]
    policy_steps: Option<usize>,
    /// Transitions to collect when no dataset file is given.
    #[arg(long)]
    n_transitions: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.env {
            cfg.env = v.clone();
        }
        if let Some(v) = &self.grade {
            cfg.grade = v.clone();
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.candidates {
            cfg.candidates = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = &self.mode {
            cfg.augment_mode = v.clone();
        }
        if let Some(v) = &self.ablation {
            cfg.ablation = v.clone();
        }
        if let Some(v) = &self.seeds {
            cfg.seeds = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.policy_steps {
            cfg.policy_steps = v;
        }
        if let Some(v) = self.n_transitions {
            cfg.n_transitions = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Roll a scripted behavior policy and write a dataset file.
    Collect {
        #[command(flatten)]
        common: ConfigArgs,
        /// Collection seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset file.
        #[arg(long = "out-file")]
        out_file: PathBuf,
    },
    /// Train the five generative/value models on a dataset.
    TrainModels {
        #[command(flatten)]
        common: ConfigArgs,
        /// Input dataset file.
        #[arg(long)]
        data: PathBuf,
        /// Directory for the five checkpoints.
        #[arg(long)]
        out_dir: PathBuf,
        /// Training seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate synthetic transitions and merge them into a dataset.
    Augment {
        #[command(flatten)]
        common: ConfigArgs,
        /// Input dataset file.
        #[arg(long)]
        data: PathBuf,
        /// Directory holding the five checkpoints.
        #[arg(long)]
        models: PathBuf,
        /// Generation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Merged dataset output file.
        #[arg(long = "out-file")]
        out_file: PathBuf,
    },
    /// Train the downstream TD3+BC learner.
    TrainPolicy {
        #[command(flatten)]
        common: ConfigArgs,
        /// Input dataset file (usually the merged one).
        #[arg(long)]
        data: PathBuf,
        /// Realtime mixing: directory with the five checkpoints.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Training seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Policy checkpoint output file.
        #[arg(long = "out-file")]
        out_file: PathBuf,
        /// Learning-curve CSV output.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Roll evaluation episodes with a trained policy.
    Evaluate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Policy checkpoint.
        #[arg(long)]
        policy: PathBuf,
        /// Number of evaluation episodes.
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Evaluation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare oracle-value densities of a dataset and a synthetic set.
    Analyze {
        #[command(flatten)]
        common: ConfigArgs,
        /// Real dataset file.
        #[arg(long)]
        data: PathBuf,
        /// Synthetic dataset file.
        #[arg(long)]
        synthetic: PathBuf,
        /// Report output file (JSON).
        #[arg(long = "out-file")]
        out_file: PathBuf,
        /// Histogram bin count.
        #[arg(long, default_value_t = 24)]
        bins: usize,
    },
    /// Collect → train models → augment → train policy → evaluate.
    Pipeline {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Multi-arm experiment suites.
    Suite {
        /// Which suite to run (quality-vs-diversity | ablation-grid).
        name: String,
        #[command(flatten)]
        common: ConfigArgs,
    },
}

fn load_models(dir: &Path) -> Result<TrainedModels> {
    Ok(TrainedModels {
        state_cvae: CvaeModel::load(&dir.join("state_cvae.ckpt"))?,
        action_cvae: CvaeModel::load(&dir.join("action_cvae.ckpt"))?,
        reward_cvae: CvaeModel::load(&dir.join("reward_cvae.ckpt"))?,
        value: ValueModel::load(&dir.join("value.ckpt"))?,
        dynamics: DynamicsModel::load(&dir.join("dynamics.ckpt"))?,
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();

    match cli.command {
        Command::Collect {
            common,
            seed,
            out_file,
        } => {
            let mut cfg = common.resolve()?;
            cfg.collect_seed = seed;
            let spec = cfg.env_spec();
            let dataset = if cfg.grade_is_replay() {
                collect_replay_analog(&spec, cfg.n_transitions, seed)?
            } else {
                collect_dataset(&cfg)?
            };
            dataset.save(&out_file)?;
            println!(
                "collected {} transitions ({}) -> {}",
                dataset.len(),
                dataset.source_tag(),
                out_file.display()
            );
        }
        Command::TrainModels {
            common,
            data,
            out_dir,
            seed,
        } => {
            let cfg = common.resolve()?;
            let dataset = TransitionDataset::load(&data)?;
            let (models, reports) = train_models(&dataset, &cfg, seed)?;
            std::fs::create_dir_all(&out_dir)?;
            models.state_cvae.save(&out_dir.join("state_cvae.ckpt"))?;
            models.action_cvae.save(&out_dir.join("action_cvae.ckpt"))?;
            models.reward_cvae.save(&out_dir.join("reward_cvae.ckpt"))?;
            models.value.save(&out_dir.join("value.ckpt"))?;
            models.dynamics.save(&out_dir.join("dynamics.ckpt"))?;
            write_json(&out_dir.join("train_report.json"), &reports)?;
            println!(
                "trained 5 models on {} transitions -> {}",
                dataset.len(),
                out_dir.display()
            );
            println!(
                "held-out recon MSE: state {:.2e}, action {:.2e}, reward {:.2e}",
                reports.state_cvae.heldout_mse,
                reports.action_cvae.heldout_mse,
                reports.reward_cvae.heldout_mse
            );
        }
        Command::Augment {
            common,
            data,
            models,
            seed,
            out_file,
        } => {
            let cfg = common.resolve()?;
            let dataset = TransitionDataset::load(&data)?;
            let trained = load_models(&models)?;
            let aug_cfg = AugmentConfig {
                seed,
                ..cfg.augment_config(seed)
            };
            let spec = cfg.env_spec();
            let outcome = augment_offline(&trained, &dataset, &aug_cfg, Some(&spec))?;
            outcome.merged.save(&out_file)?;

            let stem = out_file.with_extension("");
            let synthetic_path = PathBuf::from(format!("{}-synthetic.bin", stem.display()));
            let provenance_path = PathBuf::from(format!("{}-provenance.csv", stem.display()));
            let report_path = PathBuf::from(format!("{}-report.json", stem.display()));
            if !outcome.synthetic.is_empty() {
                let synth = TransitionDataset::new(
                    outcome.synthetic.iter().map(|s| s.transition.clone()).collect(),
                    format!("{}-synthetic", dataset.source_tag()),
                )?;
                synth.save(&synthetic_path)?;
                let mut csv = String::from("source_state_index,candidate_rank,dynamics_distance\n");
                for s in &outcome.synthetic {
                    csv.push_str(&format!(
                        "{},{},{}\n",
                        s.source_state_index, s.candidate_rank, s.dynamics_distance
                    ));
                }
                std::fs::write(&provenance_path, csv)?;
                let density = analyze_density(
                    &dataset,
                    &outcome
                        .synthetic
                        .iter()
                        .map(|s| s.transition.clone())
                        .collect::<Vec<_>>(),
                    &spec,
                    cfg.discount,
                    cfg.density_bins,
                )?;
                write_json(&report_path, &density)?;
            }
            println!(
                "merged {} + {} synthetic -> {}",
                dataset.len(),
                outcome.synthetic.len(),
                out_file.display()
            );
        }
        Command::TrainPolicy {
            common,
            data,
            models,
            seed,
            out_file,
            curve,
        } => {
            let cfg = common.resolve()?;
            let dataset = TransitionDataset::load(&data)?;
            let spec = cfg.env_spec();
            let trained = models.as_deref().map(load_models).transpose()?;
            let aug_cfg = cfg.augment_config(seed);
            let source = match &trained {
                Some(m) => DataSource::Realtime {
                    models: m,
                    dataset: &dataset,
                    cfg: &aug_cfg,
                    env: Some(&spec),
                },
                None => DataSource::Offline(&dataset),
            };
            let (policy, curve_points) =
                train_policy(&source, &cfg.policy_config(), &cfg.policy_train_config(), seed)?;
            policy.save(&out_file)?;
            if let Some(curve_path) = curve {
                let mut text = String::from("step,critic_loss,actor_loss\n");
                for p in &curve_points {
                    text.push_str(&format!("{},{},{}\n", p.step, p.critic_loss, p.actor_loss));
                }
                std::fs::write(curve_path, text)?;
            }
            println!("trained policy -> {}", out_file.display());
        }
        Command::Evaluate {
            common,
            policy,
            episodes,
            seed,
        } => {
            let cfg = common.resolve()?;
            let spec = cfg.env_spec();
            let model = ActorCritic::load(&policy)?;
            let report = evaluate(&Controller::Learned(&model), &spec, episodes, seed)?;
            let anchors = normalization_anchors(&spec, 20, 0)?;
            println!("episode,return");
            for (i, r) in report.returns.iter().enumerate() {
                println!("{i},{r}");
            }
            println!(
                "mean {:.4} +- {:.4} (normalized score {:.2})",
                report.mean,
                report.std,
                anchors.normalized_score(report.mean)
            );
        }
        Command::Analyze {
            common,
            data,
            synthetic,
            out_file,
            bins,
        } => {
            let cfg = common.resolve()?;
            let spec = cfg.env_spec();
            let dataset = TransitionDataset::load(&data)?;
            let synth = TransitionDataset::load(&synthetic)?;
            let report = analyze_density(
                &dataset,
                synth.transitions(),
                &spec,
                cfg.discount,
                bins,
            )?;
            write_json(&out_file, &report)?;
            println!(
                "real mean {:.4} median {:.4} | synthetic mean {:.4} median {:.4} ({} bins over [{:.4}, {:.4}])",
                report.real_mean,
                report.real_median,
                report.synthetic_mean,
                report.synthetic_median,
                report.bin_count,
                report.bin_lo,
                report.bin_hi
            );
        }
        Command::Pipeline { common } => {
            let cfg = common.resolve()?;
            let report = pipeline(&cfg, argv)?;
            println!(
                "pipeline done: mean return {:.4}, normalized score {:.2} over {} seeds -> {}/report.json",
                report.mean_return,
                report.mean_normalized_score,
                report.per_seed.len(),
                cfg.out_dir
            );
        }
        Command::Suite { name, common } => {
            let cfg = common.resolve()?;
            let report = match name.as_str() {
                "quality-vs-diversity" => suite_quality_vs_diversity(&cfg, argv)?,
                "ablation-grid" => suite_ablation_grid(&cfg, argv)?,
                other => bail!("unknown suite `{other}` (quality-vs-diversity | ablation-grid)"),
            };
            print!("{}", report.table());
            println!("written to {}/{}.json", cfg.out_dir, report.suite);
        }
    }
    Ok(())
}
