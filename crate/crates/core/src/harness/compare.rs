use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::IntentionVariant;

use super::config::{derive_seed, RunConfig};
use super::eval::{evaluate, mean_std, write_report, EvalReport, PolicySet};
use super::train::train;

/// Evaluation reports of every training run of one variant.
#[derive(Clone, Debug)]
pub struct VariantRuns {
    pub variant: IntentionVariant,
    pub reports: Vec<EvalReport>,
}

/// One row of `compare_episodes.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareEpisodeRow {
    pub variant: String,
    pub run: usize,
    pub seed: u64,
    pub objects_removed: usize,
}

/// Columns follow `IntentionVariant::ALL`; cells hold the mean and
/// standard deviation across runs of each run's mean objects removed.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub environment: String,
    pub team: String,
    pub variants: Vec<IntentionVariant>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub episodes: Vec<CompareEpisodeRow>,
}

impl ComparisonTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["environment".to_string(), "team".into(), "statistic".into()];
        h.extend(self.variants.iter().map(|v| v.tag().to_string()));
        h
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.header())?;
        for (name, vals) in [("mean", &self.mean), ("std", &self.std)] {
            let mut rec = vec![self.environment.clone(), self.team.clone(), name.to_string()];
            rec.extend(vals.iter().map(|v| format!("{v:.4}")));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the table; every report of every variant must cover the same
/// evaluation seeds in the same order.
pub fn comparison_table(cfg: &RunConfig, mut runs: Vec<VariantRuns>) -> Result<ComparisonTable> {
    let seeds = runs
        .first()
        .and_then(|r| r.reports.first())
        .map(|r| r.seeds())
        .ok_or_else(|| Error::input("nothing to compare"))?;
    for r in &runs {
        if r.reports.is_empty() {
            return Err(Error::input(format!("variant {} has no runs", r.variant)));
        }
        if r.reports.iter().any(|rep| rep.seeds() != seeds) {
            return Err(Error::input(format!("variant {} was evaluated on different seeds", r.variant)));
        }
    }
    let rank = |v: &IntentionVariant| IntentionVariant::ALL.iter().position(|a| a == v).expect("listed variant");
    runs.sort_by_key(|r| rank(&r.variant));
    if runs.windows(2).any(|w| w[0].variant == w[1].variant) {
        return Err(Error::config("a variant is listed twice"));
    }
    let mut table = ComparisonTable {
        environment: format!("{}", cfg.environment.layout),
        team: cfg.team.to_string(),
        variants: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
        episodes: Vec::new(),
    };
    for r in &runs {
        let per_run: Vec<f64> = r.reports.iter().map(|rep| rep.summary.objects_removed_mean).collect();
        let (m, s) = mean_std(&per_run);
        table.variants.push(r.variant);
        table.mean.push(m);
        table.std.push(s);
        for (run, rep) in r.reports.iter().enumerate() {
            table.episodes.extend(rep.rows.iter().map(|row| CompareEpisodeRow {
                variant: r.variant.tag().to_string(),
                run,
                seed: row.seed,
                objects_removed: row.objects_removed,
            }));
        }
    }
    Ok(table)
}

/// Trains `runs` policies per variant from seeds derived from `seed`,
/// evaluates each on the shared seed list and writes `table.csv`,
/// `compare_episodes.csv` and per-run outputs under `<variant>/run<k>/`.
pub fn compare(cfg: &RunConfig, variants: &[IntentionVariant], runs: usize, seed: u64, out: &Path) -> Result<ComparisonTable> {
    if variants.is_empty() || runs == 0 {
        return Err(Error::config("compare needs at least one variant and one run"));
    }
    let mut all = Vec::new();
    for &variant in variants {
        let vcfg = RunConfig { variant, ..cfg.clone() };
        vcfg.validate()?;
        let mut reports = Vec::new();
        for run in 0..runs {
            let run_seed = derive_seed(seed, run as u64);
            let dir = super::variant_dir(out, variant, run);
            let trained = train(&vcfg, run_seed, Some(&dir))?;
            let set = PolicySet::load(&dir, &vcfg)?;
            let report = evaluate(&vcfg, Some(&set))?;
            write_report(&report, &vcfg, serde_json::json!({ "train_seed": trained.trainer.summary.seed }), &dir)?;
            reports.push(report);
        }
        all.push(VariantRuns { variant, reports });
    }
    let table = comparison_table(cfg, all)?;
    fs::create_dir_all(out)?;
    table.write_csv(&out.join("table.csv"))?;
    super::write_csv(&out.join("compare_episodes.csv"), &table.episodes)?;
    Ok(table)
}
