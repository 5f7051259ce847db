mod common;

use intentmap::coordination::{
    ground_truth_records, intention_slot, read_trajectory, run_episode, write_trajectory, ChannelModel, Controller, DecisionContext,
    EpisodeConfig,
};
use intentmap::environment::{generate_environment, EnvironmentSpec, Layout, RobotKind, Task};
use intentmap::gridcore::{CellCoord, Pose};
use intentmap::learner::ActionIndex;
use intentmap::perception::{encode_intention, IntentionEncoding, IntentionVariant, TensorConfig};
use intentmap::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Random {
    rng: ChaCha8Rng,
    channels: usize,
    out: usize,
    checked: usize,
    mismatches: usize,
}

impl Controller for Random {
    fn act(&mut self, ctx: &DecisionContext<'_>) -> Result<ActionIndex> {
        let pose = ctx.world.agents[ctx.agent].pose;
        let team = ctx.world.agents.len();
        let canvas = (ctx.world.grid.width(), ctx.world.grid.height());
        let render = |records: &[_]| {
            let enc = encode_intention::<f32>(records, IntentionVariant::RampPath, &pose, self.out, canvas, team).unwrap();
            match enc {
                IntentionEncoding::Maps(m) => m,
                IntentionEncoding::Flat(_) => unreachable!(),
            }
        };
        let truth = ground_truth_records(ctx.world, ctx.agent);
        self.checked += 1;
        let slot = intention_slot(ctx.world.spec.task);
        if ctx.records.len() != team - 1 || render(ctx.records) != render(&truth) || ctx.state.channel(slot) != render(&truth)[0] {
            self.mismatches += 1;
        }
        let channels = self.channels.min(ctx.world.agents[ctx.agent].kind.action_channels());
        Ok(ActionIndex::new(
            self.rng.gen_range(0..channels),
            self.rng.gen_range(0..self.out),
            self.rng.gen_range(0..self.out),
        ))
    }
}

fn config(budget: u64) -> EpisodeConfig {
    EpisodeConfig {
        variant: IntentionVariant::RampPath,
        tensor: TensorConfig {
            out_size: 15,
            ground_truth_distances: false,
        },
        channel: ChannelModel::default(),
        channel_seed: 0,
        tick_budget: Some(budget),
    }
}

#[test]
fn mailbox_renders_match_ground_truth_paths() {
    let spec = EnvironmentSpec::new(Layout::SmallDivider, Task::Foraging);
    let mut total = 0;
    for seed in 0..5 {
        let mut world = generate_environment(&spec, &[RobotKind::Lifting; 4], seed).unwrap();
        let mut c = Random {
            rng: common::rng(seed),
            channels: 2,
            out: 15,
            checked: 0,
            mismatches: 0,
        };
        let m = run_episode(&mut world, &mut c, &config(150)).unwrap();
        assert_eq!(c.mismatches, 0, "seed {seed}");
        assert_eq!(m.oversized_messages, 0);
        assert!(m.decisions.iter().all(|&d| d > 0));
        total += c.checked;
    }
    assert!(total > 100);
}

#[test]
fn eval_runs_are_deterministic() {
    let spec = EnvironmentSpec::new(Layout::SmallEmpty, Task::Foraging);
    let run = || {
        let mut world = generate_environment(&spec, &[RobotKind::Lifting, RobotKind::Pushing], 3).unwrap();
        let mut c = Random {
            rng: common::rng(9),
            channels: 2,
            out: 15,
            checked: 0,
            mismatches: 0,
        };
        let m = run_episode(&mut world, &mut c, &config(100)).unwrap();
        (m.returns.clone(), m.trajectory.clone(), m.events.len())
    };
    assert_eq!(run(), run());
}

#[test]
fn lossy_channel_still_runs_and_loses_messages() {
    let spec = EnvironmentSpec::new(Layout::SmallEmpty, Task::Foraging);
    let mut world = generate_environment(&spec, &[RobotKind::Lifting; 3], 1).unwrap();
    let mut cfg = config(80);
    cfg.channel = ChannelModel {
        drop_probability: 0.5,
        delay: 3,
    };
    let mut c = Random {
        rng: common::rng(1),
        channels: 2,
        out: 15,
        checked: 0,
        mismatches: 0,
    };
    run_episode(&mut world, &mut c, &cfg).unwrap();
    assert!(c.mismatches > 0);
}

#[test]
fn unequal_paths_decide_asynchronously() {
    let spec = EnvironmentSpec::new(Layout::SmallEmpty, Task::Foraging);
    let mut world = generate_environment(&spec, &[RobotKind::Pushing; 2], 2).unwrap();
    struct Fixed;
    impl Controller for Fixed {
        fn act(&mut self, ctx: &DecisionContext<'_>) -> Result<ActionIndex> {
            // Agent 0 always targets its own cell, agent 1 a cell 4 ahead.
            Ok(if ctx.agent == 0 { ActionIndex::new(0, 7, 7) } else { ActionIndex::new(0, 11, 7) })
        }
    }
    // Keep agent 1 away from walls so its 4-cell moves succeed for a while.
    world.agents[1].pose = Pose::at_cell(CellCoord::new(10, 10), std::f64::consts::FRAC_PI_2);
    let m = run_episode(&mut world, &mut Fixed, &config(12)).unwrap();
    assert_eq!(m.decisions[0], 12);
    assert!(m.decisions[1] < m.decisions[0]);
}

#[test]
fn trajectory_csv_round_trip() {
    let spec = EnvironmentSpec::new(Layout::SmallEmpty, Task::SearchAndRescue);
    let mut world = generate_environment(&spec, &[RobotKind::Rescue], 0).unwrap();
    let mut c = Random {
        rng: common::rng(0),
        channels: 1,
        out: 15,
        checked: 0,
        mismatches: 0,
    };
    let mut cfg = config(5);
    cfg.variant = IntentionVariant::None;
    let m = run_episode(&mut world, &mut c, &cfg).unwrap();
    let mut buf = Vec::new();
    write_trajectory(&m.trajectory, &mut buf).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("tick,id,x,y,heading,carrying\n"));
    assert_eq!(read_trajectory(buf.as_slice()).unwrap(), m.trajectory);
}
