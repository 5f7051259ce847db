//! Experiment orchestration behind the command line: training runs,
//! seeded evaluation, variant comparisons and renders.

mod compare;
mod config;
mod eval;
mod render;
mod train;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::coordination::read_trajectory;
use crate::error::{Error, Result};

pub use compare::{compare, comparison_table, CompareEpisodeRow, ComparisonTable, VariantRuns};
pub use config::{derive_seed, RunConfig, Team};
pub use eval::{evaluate, mean_std, write_report, EpisodeRow, EvalController, EvalReport, EvalSummary, PolicySet};
pub use render::{
    agent_color, initial_state, render_all, render_q_map, render_trajectory, write_state_channels, Rgb, CELL_PX,
};
pub use train::{policy_file, predictor_file, train, EpisodeLogRow, TrainLogRow, TrainOutput, TrainSummary, Trainer};

/// CSV with a one-line header. An empty slice still gets no header, so
/// callers that need one write at least one row.
pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Seed from the configuration, or a fresh one from the OS.
pub fn resolve_seed(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or_else(rand::random)
}

/// `train`: writes checkpoints and logs into `out`.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<TrainSummary> {
    let seed = resolve_seed(cfg);
    let resolved = RunConfig {
        seed: Some(seed),
        ..cfg.clone()
    };
    Ok(train(&resolved, seed, Some(out))?.trainer.summary)
}

/// `eval`: loads checkpoints from `checkpoints` (or plays uniformly at
/// random when `None`) and writes the report plus a trajectory render of
/// the first seed into `out`.
pub fn cmd_eval(cfg: &RunConfig, checkpoints: Option<&Path>, out: &Path) -> Result<EvalReport> {
    cfg.validate()?;
    let set = checkpoints.map(|d| PolicySet::load(d, cfg)).transpose()?;
    let report = evaluate(cfg, set.as_ref())?;
    let source = match checkpoints {
        Some(d) => serde_json::json!({ "checkpoints": d.display().to_string() }),
        None => serde_json::json!({ "policy": "random" }),
    };
    write_report(&report, cfg, source, out)?;
    if let (Some(row), Some(m)) = (report.rows.first(), report.metrics.first()) {
        let world = crate::environment::generate_environment(&cfg.environment, cfg.team.kinds(), row.seed)?;
        render_trajectory(&world, &m.trajectory)?.save(&out.join(format!("trajectory_seed_{}.ppm", row.seed)))?;
    }
    Ok(report)
}

/// `render`: state channels of agent 0 in the layout from `seed`, its Q map
/// when checkpoints are given, and a trajectory overlay from a CSV log.
pub fn cmd_render(
    cfg: &RunConfig,
    seed: u64,
    checkpoints: Option<&Path>,
    trajectory: Option<&Path>,
    out: &Path,
) -> Result<()> {
    cfg.validate()?;
    let set = checkpoints.map(|d| PolicySet::load(d, cfg)).transpose()?;
    let rows = match trajectory {
        Some(p) => {
            let f = std::fs::File::open(p).map_err(|e| Error::Input(format!("{}: {e}", p.display())))?;
            Some(read_trajectory(f).map_err(|e| Error::Input(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    render_all(cfg, seed, set.as_ref(), rows.as_deref(), out)
}

/// `compare` output directory layout helper.
pub fn variant_dir(out: &Path, variant: crate::perception::IntentionVariant, run: usize) -> PathBuf {
    out.join(variant.tag()).join(format!("run{run}"))
}
