use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use intentmap::harness::{cmd_eval, cmd_render, cmd_train, compare, resolve_seed, RunConfig};
use intentmap::learner::Scale;
use intentmap::perception::IntentionVariant;

#[derive(Parser)]
#[command(name = "intentmap", version, about = "Spatial intention maps for multi-robot teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON). Defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training seed for train and compare, layout seed for render, first
    /// evaluation seed for eval.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Intention variant tag, e.g. ramp_path or none.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    scale: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one policy per robot kind.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate checkpoints on the configured evaluation seeds.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory holding policy_<kind>.simq files.
        #[arg(long, conflicts_with = "random")]
        checkpoints: Option<PathBuf>,
        /// Evaluate the uniform random policy instead.
        #[arg(long)]
        random: bool,
    },
    /// Train and evaluate several variants on shared seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated variant tags.
        #[arg(long, value_delimiter = ',', default_value = "ramp_path,none")]
        variants: Vec<String>,
        /// Training runs per variant.
        #[arg(long, default_value_t = 5)]
        runs: usize,
    },
    /// Render state channels, Q-value maps and trajectory overlays.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        /// Trajectory CSV written by eval.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> intentmap::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &common.variant {
        cfg.variant = v.parse()?;
    }
    if let Some(s) = &common.scale {
        cfg.scale = s.parse::<Scale>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json(value: &impl serde::Serialize) -> intentmap::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> intentmap::Result<()> {
    match cli.command {
        Command::Train { common } => {
            let mut cfg = load_config(&common)?;
            if common.seed.is_some() {
                cfg.seed = common.seed;
            }
            let summary = cmd_train(&cfg, &common.out)?;
            print_json(&summary)
        }
        Command::Eval {
            common,
            checkpoints,
            random,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = common.seed {
                let n = cfg.eval_seeds.len() as u64;
                cfg.eval_seeds = (s..s + n).collect();
            }
            let dir = match (checkpoints, random) {
                (Some(d), _) => Some(d),
                (None, true) => None,
                (None, false) => Some(common.out.clone()),
            };
            let report = cmd_eval(&cfg, dir.as_deref(), &common.out)?;
            print_json(&report.summary)
        }
        Command::Compare { common, variants, runs } => {
            let cfg = load_config(&common)?;
            let variants = variants.iter().map(|v| v.parse()).collect::<intentmap::Result<Vec<IntentionVariant>>>()?;
            let seed = common.seed.unwrap_or_else(|| resolve_seed(&cfg));
            let table = compare(&cfg, &variants, runs, seed, &common.out)?;
            println!("{}", table.header().join(","));
            for (name, vals) in [("mean", &table.mean), ("std", &table.std)] {
                let vals: Vec<String> = vals.iter().map(|v| format!("{v:.4}")).collect();
                println!("{},{},{name},{}", table.environment, table.team, vals.join(","));
            }
            Ok(())
        }
        Command::Render {
            common,
            checkpoints,
            trajectory,
        } => {
            let cfg = load_config(&common)?;
            let seed = common.seed.or(cfg.eval_seeds.first().copied()).unwrap_or(0);
            cmd_render(&cfg, seed, checkpoints.as_deref(), trajectory.as_deref(), &common.out)?;
            println!("{}", Path::new(&common.out).join("render_meta.json").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
