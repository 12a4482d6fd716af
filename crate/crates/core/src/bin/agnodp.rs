#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use agnodp::audit::{empirical_dp_estimate, exact_dp_check, swap_neighbors, AuditReport};
use agnodp::harness::{
    emit_plot_script, generate_distribution, run_experiment, run_learner, ExperimentConfig, LearnerKind,
};
use agnodp::learners::{item_output_probabilities, private_min_error};
use agnodp::mechanism::PrivacyBudget;
use agnodp::model::{population_error, sample_dataset, HypothesisClass, UserDataset};
use agnodp::rng::derive_rng;
use agnodp::{ConstantsMode, DpError, Result};

#[derive(Parser)]
#[command(name = "agnodp", version, about = "Pure-DP agnostic learners and privacy audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Theory,
    Practical,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Worker threads for trial-level parallelism.
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    common: Common,
    /// Learn on this dataset (one user per line, `x:y` pairs) instead of sampling.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Item-level learner (m = 1).
    LearnItem(LearnArgs),
    /// User-level learner.
    LearnUser(LearnArgs),
    /// Threshold learner.
    LearnThreshold(LearnArgs),
    /// Private estimate of the best threshold error.
    MinError(LearnArgs),
    /// Privacy audit of the configured learner on a swap-neighbor pair.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Exact audit over all swap neighbors (item learner only).
        #[arg(long)]
        exact: bool,
    },
    /// Run all trials of all sweep points and write the CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also write a gnuplot script for the CSV (requires --out).
        #[arg(long)]
        plot_script: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = common.mode {
        cfg.constants_mode = match m {
            Mode::Theory => ConstantsMode::Theory,
            Mode::Practical => ConstantsMode::Practical,
        };
        if cfg.constants_mode == ConstantsMode::Theory {
            cfg.slack_scale = None;
        }
    }
    cfg.validate()?;
    if let Some(k) = common.parallel {
        if k == 0 {
            return Err(DpError::Config("--parallel must be at least 1".into()));
        }
    }
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dataset(cfg: &ExperimentConfig, data: &Option<PathBuf>) -> Result<UserDataset> {
    let domain = cfg.domain()?;
    match data {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            UserDataset::from_text(&text, domain).map_err(|e| DpError::Config(format!("{}: {e}", p.display())))
        }
        None => {
            let dist = generate_distribution(&cfg.distribution, domain)?;
            sample_dataset(&dist, cfg.n, cfg.m, &mut derive_rng(cfg.seed, &[u64::MAX, 0]))
        }
    }
}

fn learn(kind: LearnerKind, args: &LearnArgs) -> Result<()> {
    let mut cfg = load(&args.common)?;
    cfg.learner = kind;
    cfg.sweep = Default::default();
    let z = dataset(&cfg, &args.data)?;
    let params = cfg.params_at(&cfg.sweep_points()[0])?;
    let mut rng = derive_rng(cfg.seed, &[0, 0]);
    let h = run_learner(kind, &z, &params, &mut rng)?;
    let dist = generate_distribution(&cfg.distribution, cfg.domain()?)?;
    let pop = population_error(&dist, &h)?;
    let (_, best) = dist.best_threshold();
    emit(
        &args.common.out,
        &format!(
            "learner: {}\nn: {}\nm: {}\nhypothesis: {h}\npopulation_error: {pop}\npopulation_excess: {}\n",
            kind.name(),
            z.n(),
            z.m(),
            pop - best
        ),
    )
}

fn min_error(args: &LearnArgs) -> Result<()> {
    let cfg = load(&args.common)?;
    let z = dataset(&cfg, &args.data)?;
    let params = cfg.params_at(&cfg.sweep_points()[0])?;
    let class = HypothesisClass::thresholds(z.domain());
    let mut budget = PrivacyBudget::new(params.epsilon)?;
    let mut rng = derive_rng(cfg.seed, &[0, 0]);
    let est = private_min_error(
        &z,
        &class,
        params.epsilon,
        params.alpha,
        params.beta,
        &params.constants,
        &mut budget,
        &mut rng,
    )?;
    let dist = generate_distribution(&cfg.distribution, cfg.domain()?)?;
    emit(
        &args.common.out,
        &format!(
            "eta_hat: {}\ninterval: [{}, {}]\niterations: {}\neta: {}\n",
            est.eta_hat,
            est.interval.0,
            est.interval.1,
            est.iterations,
            dist.best_threshold().1
        ),
    )
}

fn audit(common: &Common, exact: bool) -> Result<()> {
    let cfg = load(common)?;
    let domain = cfg.domain()?;
    let dist = generate_distribution(&cfg.distribution, domain)?;
    let params = cfg.params_at(&cfg.sweep_points()[0])?;
    let mut rng = derive_rng(cfg.seed, &[u64::MAX, 1]);
    let z = sample_dataset(&dist, cfg.n, cfg.m, &mut rng)?;
    let report: AuditReport = if exact {
        if cfg.learner != LearnerKind::Item {
            return Err(DpError::Config("--exact supports the item learner only".into()));
        }
        let class = HypothesisClass::thresholds(domain);
        let pairs: Vec<(UserDataset, UserDataset)> = swap_neighbors(&z)?.into_iter().map(|w| (z.clone(), w)).collect();
        exact_dp_check(
            |d: &UserDataset| item_output_probabilities(d, &class, &class, params.epsilon),
            &pairs,
            params.epsilon,
        )?
    } else {
        // first user replaced by a fresh draw
        let other = sample_dataset(&dist, 1, cfg.m, &mut rng)?;
        let w = z.with_user(0, other.user(0))?;
        let kind = cfg.learner;
        let sampler = move |d: &UserDataset, r: &mut agnodp::DpRng| {
            let h = run_learner(kind, d, &params, r)?;
            Ok(h.threshold_param().unwrap_or(0))
        };
        empirical_dp_estimate(sampler, (&z, &w), params.epsilon, cfg.trials as u64, cfg.seed)?
    };
    let text = format!("{}{}\n{}\n", report.to_text(), AuditReport::CSV_HEADER, report.to_csv_row());
    emit(&common.out, &text)
}

fn sweep(common: &Common, plot: &Option<PathBuf>) -> Result<()> {
    let cfg = load(common)?;
    let res = run_experiment(&cfg, common.parallel)?;
    emit(&common.out, &res.to_csv()?)?;
    if let Some(script) = plot {
        let csv = common.out.as_ref().ok_or_else(|| DpError::Config("--plot-script needs --out".into()))?;
        emit_plot_script(csv, script)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::LearnItem(a) => learn(LearnerKind::Item, a),
        Command::LearnUser(a) => learn(LearnerKind::User, a),
        Command::LearnThreshold(a) => learn(LearnerKind::Threshold, a),
        Command::MinError(a) => min_error(a),
        Command::Audit { common, exact } => audit(common, *exact),
        Command::Sweep { common, plot_script } => sweep(common, plot_script),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
