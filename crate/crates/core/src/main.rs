use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hmamp::config::{ExperimentConfig, Method};
use hmamp::eval::reference_paths;
use hmamp::experiment::{
    evaluate_method, labelled_reference_paths, load_policy, load_reference, read_eval_paths,
    run_training, write_eval_outputs, write_plot_data, write_reference_set, EE_PATHS_FILE,
    POLICY_FILE, REPORT_FILE,
};
use hmamp::gradcheck::{run_gradient_checks, CHECK_NAMES};
use hmamp::metrics::PATH_SAMPLES;
use hmamp::{Error, Result};

#[derive(Parser)]
#[command(name = "hmamp", version, about = "Adversarial motion priors for robotic hammering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment configuration (TOML); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the training and evaluation seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// hmamp, rl-noamp or dppcp.
    #[arg(long)]
    method: Option<Method>,
    /// Training episodes (train) or evaluation episodes (eval, compare).
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write logs, checkpoints and a metric report.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint (or the planner) with observation noise off.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Policy checkpoint; defaults to policy.ckpt in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate all three methods into one report.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        hmamp: PathBuf,
        #[arg(long = "rl-noamp")]
        rl_noamp: PathBuf,
    },
    /// Resample evaluated hammer-head paths (and the reference set) for plotting.
    PlotData {
        #[command(flatten)]
        common: Common,
        /// eval_paths.csv files written by eval or compare.
        #[arg(long, required = true, num_args = 1..)]
        logs: Vec<PathBuf>,
        #[arg(long, default_value_t = PATH_SAMPLES)]
        samples: usize,
    },
    /// Write the synthetic wind-up reference clips.
    GenRef {
        #[command(flatten)]
        common: Common,
    },
    /// Run every finite-difference gradient check.
    CheckGrad {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Perturb the named check's analytic gradient (harness self-test).
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.training.seed = s;
            cfg.eval.seed = s;
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

fn train(common: &Common) -> Result<()> {
    let mut cfg = common.load()?;
    if let Some(e) = common.episodes {
        cfg.training.episodes = e;
    }
    cfg.validate()?;
    let clips = load_reference(&cfg)?;
    let out = cfg.out.clone();
    let total = cfg.training.episodes;
    let outcome = run_training(&cfg, clips.as_deref(), Some(&out), |s| {
        if s.episode % 10 == 0 || s.episode == total {
            eprintln!(
                "episode {:>5}/{total}  r_g {:>10.3}  r_s {:.3}  success {:.2}  disc_loss {:.4}",
                s.episode, s.mean_r_g, s.mean_r_s, s.success_rate, s.disc_loss
            );
        }
    })?;
    let refs = clips.as_deref().map(reference_paths).unwrap_or_default();
    let rows = evaluate_method(&cfg, Some(outcome.trainer.policy()), &refs)?;
    let report = write_eval_outputs(&out, &[(cfg.method, rows)])?;
    print!("{}", report.to_text());
    eprintln!("artifacts written to {}", out.display());
    Ok(())
}

fn eval(common: &Common, checkpoint: Option<&Path>) -> Result<()> {
    let mut cfg = common.load()?;
    if let Some(e) = common.episodes {
        cfg.eval.episodes = e;
    }
    cfg.validate()?;
    let clips = load_reference(&cfg)?;
    let refs = clips.as_deref().map(reference_paths).unwrap_or_default();
    let policy = if cfg.method.is_learned() {
        let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.out.join(POLICY_FILE));
        Some(load_policy(&path, &cfg)?)
    } else {
        None
    };
    let rows = evaluate_method(&cfg, policy.as_ref(), &refs)?;
    let report = write_eval_outputs(&cfg.out, &[(cfg.method, rows)])?;
    print!("{}", report.to_text());
    Ok(())
}

fn compare(common: &Common, hmamp: &Path, rl_noamp: &Path) -> Result<()> {
    let mut cfg = common.load()?;
    if let Some(e) = common.episodes {
        cfg.eval.episodes = e;
    }
    cfg.validate()?;
    let clips = load_reference(&ExperimentConfig {
        method: Method::RlNoamp,
        ..cfg.clone()
    })?;
    let refs = clips.as_deref().map(reference_paths).unwrap_or_default();
    let mut results = Vec::new();
    for method in Method::ALL {
        let run = ExperimentConfig { method, ..cfg.clone() };
        let policy = match method {
            Method::Hmamp => Some(load_policy(hmamp, &run)?),
            Method::RlNoamp => Some(load_policy(rl_noamp, &run)?),
            Method::Dppcp => None,
        };
        results.push((method, evaluate_method(&run, policy.as_ref(), &refs)?));
    }
    let report = write_eval_outputs(&cfg.out, &results)?;
    print!("{}", report.to_text());
    eprintln!("report written to {}", cfg.out.join(REPORT_FILE).display());
    Ok(())
}

fn plot_data(common: &Common, logs: &[PathBuf], samples: usize) -> Result<()> {
    let cfg = common.load()?;
    let mut paths = Vec::new();
    for log in logs {
        paths.extend(read_eval_paths(log)?);
    }
    let clips = load_reference(&ExperimentConfig {
        method: Method::RlNoamp,
        ..cfg.clone()
    })?;
    if let Some(c) = &clips {
        paths.extend(labelled_reference_paths(c));
    }
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(EE_PATHS_FILE);
    let written = write_plot_data(BufWriter::new(File::create(&path)?), &paths, samples)?;
    eprintln!("{} paths of {samples} points written to {}", written.len(), path.display());
    Ok(())
}

fn gen_ref(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let dir = common.out.clone().unwrap_or_else(|| cfg.dataset.clone());
    for p in write_reference_set(&cfg, &dir)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn check_grad(seed: u64, trials: usize, corrupt: Option<&str>) -> Result<bool> {
    if let Some(name) = corrupt {
        if !CHECK_NAMES.contains(&name) {
            return Err(Error::Config(format!("unknown gradient check '{name}'")));
        }
    }
    let report = run_gradient_checks(seed, trials.max(1), corrupt)?;
    print!("{}", report.to_text());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { common } => train(common).map(|_| true),
        Command::Eval { common, checkpoint } => eval(common, checkpoint.as_deref()).map(|_| true),
        Command::Compare {
            common,
            hmamp,
            rl_noamp,
        } => compare(common, hmamp, rl_noamp).map(|_| true),
        Command::PlotData { common, logs, samples } => plot_data(common, logs, *samples).map(|_| true),
        Command::GenRef { common } => gen_ref(common).map(|_| true),
        Command::CheckGrad { seed, trials, corrupt } => check_grad(*seed, *trials, corrupt.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("gradient check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
