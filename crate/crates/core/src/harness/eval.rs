use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coordination::{run_episode, write_trajectory, Controller, DecisionContext, EpisodeMetrics};
use crate::environment::{generate_environment, RobotKind};
use crate::error::{Error, Result};
use crate::gridcore::ScalarMap;
use crate::learner::{load_checkpoint, select_action, ActionIndex, FcnNet, POLICY_MAGIC, PREDICTOR_MAGIC};
use crate::perception::StateTensor;
use crate::predictor::{predict_intention, IntentionSource};

use super::config::{derive_seed, RunConfig};
use super::train::{policy_file, predictor_file};

/// Trained networks for every kind of a team.
#[derive(Clone, Debug, Default)]
pub struct PolicySet {
    pub policies: BTreeMap<RobotKind, FcnNet<f32>>,
    pub predictors: BTreeMap<RobotKind, FcnNet<f32>>,
}

impl PolicySet {
    /// Loads `policy_<kind>.simq` (and predictors when the variant needs
    /// them) and checks every network against the configuration.
    pub fn load(dir: &Path, cfg: &RunConfig) -> Result<Self> {
        let mut set = PolicySet::default();
        for kind in cfg.team.distinct() {
            let (net, _) = load_checkpoint(&dir.join(policy_file(kind)), POLICY_MAGIC)?;
            check_spec(&net, &cfg.policy_spec(kind), kind, "policy")?;
            set.policies.insert(kind, net);
            if let Some(spec) = cfg.predictor_spec() {
                let (net, _) = load_checkpoint(&dir.join(predictor_file(kind)), PREDICTOR_MAGIC)?;
                check_spec(&net, &spec, kind, "predictor")?;
                set.predictors.insert(kind, net);
            }
        }
        Ok(set)
    }
}

fn check_spec(net: &FcnNet<f32>, want: &crate::learner::NetworkSpec, kind: RobotKind, what: &str) -> Result<()> {
    if net.spec() != want {
        return Err(Error::Load {
            what: format!("{kind} {what} checkpoint"),
            reason: format!("network {:?} does not match configuration {:?}", net.spec(), want),
        });
    }
    Ok(())
}

/// Picks actions from trained policies, or uniformly at random when the
/// set is `None`.
pub struct EvalController<'a> {
    set: Option<&'a PolicySet>,
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl<'a> EvalController<'a> {
    pub fn new(set: Option<&'a PolicySet>, epsilon: f64, seed: u64) -> Self {
        EvalController {
            set,
            epsilon,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for EvalController<'_> {
    fn act(&mut self, ctx: &DecisionContext<'_>) -> Result<ActionIndex> {
        let kind = ctx.world.agents[ctx.agent].kind;
        match self.set {
            Some(set) => {
                let q = set.policies[&kind].forward(&[ctx.state])?.remove(0);
                select_action(&q, self.epsilon, &mut self.rng)
            }
            None => {
                let q = StateTensor::<f32>::zeros(kind.action_channels(), ctx.state.size());
                select_action(&q, 1.0, &mut self.rng)
            }
        }
    }

    fn supports(&self, kind: RobotKind) -> bool {
        self.set.is_none_or(|s| s.policies.contains_key(&kind))
    }

    fn intention_source(&self) -> IntentionSource {
        IntentionSource::Predicted
    }

    fn predict(&mut self, kind: RobotKind, input: &StateTensor<f32>) -> Result<ScalarMap<f32>> {
        match self.set.and_then(|s| s.predictors.get(&kind)) {
            Some(net) => predict_intention(net, input),
            // The random baseline ignores its input anyway.
            None if self.set.is_none() => ScalarMap::zeros(input.size(), input.size()),
            None => Err(Error::config(format!("no intention predictor for {kind} robots"))),
        }
    }
}

/// One row of `eval_episodes.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub seed: u64,
    pub objects_removed: usize,
    pub num_objects: usize,
    pub all_removed: bool,
    pub ticks: u64,
    pub team_return: f64,
    pub obstacle_collisions: usize,
    pub agent_collisions: usize,
    pub drops_outside: usize,
    pub distance: f64,
    pub messages_sent: u64,
    pub bytes_sent: u64,
}

impl EpisodeRow {
    fn from_metrics(seed: u64, m: &EpisodeMetrics) -> Self {
        EpisodeRow {
            seed,
            objects_removed: m.objects_removed,
            num_objects: m.num_objects,
            all_removed: m.all_removed,
            ticks: m.ticks,
            team_return: m.returns.iter().sum(),
            obstacle_collisions: m.obstacle_collisions,
            agent_collisions: m.agent_collisions,
            drops_outside: m.drops_outside,
            distance: m.distance.iter().sum(),
            messages_sent: m.messages_sent,
            bytes_sent: m.bytes_sent,
        }
    }
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub objects_removed_mean: f64,
    pub objects_removed_std: f64,
    pub all_removed_count: usize,
    pub obstacle_collisions: usize,
    pub agent_collisions: usize,
    pub distance_mean: f64,
}

impl EvalSummary {
    pub fn from_rows(rows: &[EpisodeRow]) -> Self {
        let removed: Vec<f64> = rows.iter().map(|r| r.objects_removed as f64).collect();
        let (mean, std) = mean_std(&removed);
        let dist: Vec<f64> = rows.iter().map(|r| r.distance).collect();
        EvalSummary {
            episodes: rows.len(),
            objects_removed_mean: mean,
            objects_removed_std: std,
            all_removed_count: rows.iter().filter(|r| r.all_removed).count(),
            obstacle_collisions: rows.iter().map(|r| r.obstacle_collisions).sum(),
            agent_collisions: rows.iter().map(|r| r.agent_collisions).sum(),
            distance_mean: mean_std(&dist).0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub rows: Vec<EpisodeRow>,
    pub summary: EvalSummary,
    /// Per-episode metrics in seed order, including trajectories.
    pub metrics: Vec<EpisodeMetrics>,
}

impl EvalReport {
    pub fn seeds(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.seed).collect()
    }
}

/// Seeded evaluation over `cfg.eval_seeds`. `None` evaluates the uniform
/// random policy.
pub fn evaluate(cfg: &RunConfig, set: Option<&PolicySet>) -> Result<EvalReport> {
    cfg.validate()?;
    let team = cfg.team.kinds().to_vec();
    let mut rows = Vec::new();
    let mut metrics = Vec::new();
    for &seed in &cfg.eval_seeds {
        let mut world = generate_environment(&cfg.environment, &team, seed)?;
        let mut controller = EvalController::new(set, cfg.train.eval_epsilon, derive_seed(seed, 1));
        let ep = cfg.episode_config(derive_seed(seed, 3), Some(cfg.eval_tick_budget));
        let m = run_episode(&mut world, &mut controller, &ep)?;
        rows.push(EpisodeRow::from_metrics(seed, &m));
        metrics.push(m);
    }
    let summary = EvalSummary::from_rows(&rows);
    Ok(EvalReport { rows, summary, metrics })
}

/// Writes `eval_episodes.csv`, `eval_summary.json` and one trajectory CSV
/// per seed under `trajectories/`.
pub fn write_report(report: &EvalReport, cfg: &RunConfig, extra: serde_json::Value, out: &Path) -> Result<()> {
    fs::create_dir_all(out.join("trajectories"))?;
    super::write_csv(&out.join("eval_episodes.csv"), &report.rows)?;
    for (row, m) in report.rows.iter().zip(&report.metrics) {
        let f = File::create(out.join("trajectories").join(format!("seed_{}.csv", row.seed)))?;
        write_trajectory(&m.trajectory, BufWriter::new(f))?;
    }
    let doc = serde_json::json!({
        "config": cfg,
        "summary": report.summary,
        "run": extra,
    });
    fs::write(out.join("eval_summary.json"), serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}
