mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use intentmap::coordination::{ground_truth_records, run_episode, Controller, DecisionContext, EpisodeConfig};
use intentmap::environment::{
    begin_primitive, generate_environment, Action, EnvironmentSpec, Layout, Primitive, Receptacle, RobotKind, Task,
    WorldState,
};
use intentmap::gridcore::{CellCoord, OccupancyGrid, Pose, ScalarMap};
use intentmap::learner::ActionIndex;
use intentmap::perception::{
    build_state_tensor, channel_names, encode_intention, AgentBelief, IntentionVariant, ObservedAgent,
    ObservedObject, StateTensor, TensorConfig,
};
use intentmap::predictor::IntentionSource;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random actions; checks every state it is shown.
struct Checker {
    rng: ChaCha8Rng,
    channels: usize,
    seen: usize,
}

impl Controller for Checker {
    fn act(&mut self, ctx: &DecisionContext<'_>) -> intentmap::Result<ActionIndex> {
        let s = ctx.state;
        assert_eq!(s.channels(), self.channels);
        assert!(s.data().iter().all(|v| (0.0..=1.0).contains(v)), "state value outside [0, 1]");
        // The agent sits at the crop center.
        let m = s.size() / 2;
        assert!(s.channel(1).get(CellCoord::new(m, m)) >= 0.9);
        self.seen += 1;
        let kind = ctx.world.agents[ctx.agent].kind;
        Ok(ActionIndex::new(
            self.rng.gen_range(0..kind.action_channels()),
            self.rng.gen_range(0..s.size()),
            self.rng.gen_range(0..s.size()),
        ))
    }

    fn intention_source(&self) -> IntentionSource {
        IntentionSource::Predicted
    }

    fn predict(&mut self, _kind: RobotKind, input: &StateTensor<f32>) -> intentmap::Result<ScalarMap<f32>> {
        ScalarMap::filled(input.size(), input.size(), 0.5)
    }
}

#[test]
fn every_variant_stays_in_unit_range() {
    let team = [RobotKind::Lifting, RobotKind::Lifting, RobotKind::Pushing];
    for (k, variant) in IntentionVariant::ALL.into_iter().enumerate() {
        for task in [Task::Foraging, Task::SearchAndRescue] {
            let team: Vec<RobotKind> = match task {
                Task::Foraging => team.to_vec(),
                Task::SearchAndRescue => vec![RobotKind::Rescue; 3],
            };
            let spec = EnvironmentSpec::mini(Layout::SmallDivider, task, 12, 12, 4);
            let mut world = generate_environment(&spec, &team, k as u64).unwrap();
            let channels = channel_names(task, variant, team.len()).len();
            let mut c = Checker {
                rng: common::rng(k as u64),
                channels,
                seen: 0,
            };
            let cfg = EpisodeConfig {
                variant,
                tensor: TensorConfig { out_size: 15, ground_truth_distances: false },
                channel: Default::default(),
                channel_seed: 0,
                tick_budget: Some(60),
            };
            run_episode(&mut world, &mut c, &cfg).unwrap();
            assert!(c.seen >= 3, "{variant}");
        }
    }
}

const N: usize = 12;

fn rot_cell(c: CellCoord) -> CellCoord {
    CellCoord::new(N - 1 - c.row, c.col)
}

fn rot_pose(p: &Pose) -> Pose {
    Pose::new(N as f64 - p.y, p.x, p.heading + FRAC_PI_2)
}

/// The world turned a quarter counter-clockwise.
fn rotate_world(w: &WorldState) -> WorldState {
    let mut grid = OccupancyGrid::new(N, N, intentmap::gridcore::Cell::Free).unwrap();
    for c in w.grid.coords() {
        grid.set(rot_cell(c), w.grid.get(c));
    }
    let mut out = w.clone();
    out.grid = grid;
    for a in &mut out.agents {
        a.pose = rot_pose(&a.pose);
        if let Some(p) = a.primitive.as_mut() {
            *p = Primitive {
                path: p.path.iter().map(|&c| rot_cell(c)).collect(),
                ..p.clone()
            };
        }
    }
    for o in &mut out.objects {
        o.cell = rot_cell(o.cell);
    }
    out.receptacle = w.receptacle.map(|r| {
        let (a, b) = (rot_cell(r.min), rot_cell(r.max));
        Receptacle {
            min: CellCoord::new(a.col.min(b.col), a.row.min(b.row)),
            max: CellCoord::new(a.col.max(b.col), a.row.max(b.row)),
        }
    });
    out.refresh_receptacle_costs();
    out
}

/// Belief equal to ground truth.
fn omniscient(w: &WorldState, owner: usize) -> AgentBelief {
    let mut b = AgentBelief::for_world(owner, w).unwrap();
    b.grid = w.grid.clone();
    for o in w.ground_objects() {
        b.objects.insert(o.id, ObservedObject { cell: o.cell, last_seen: 0 });
    }
    for a in w.agents.iter().filter(|a| a.id != owner) {
        b.agents.insert(a.id, ObservedAgent { pose: a.pose, carrying: false, last_seen: 0 });
    }
    b
}

fn state(w: &WorldState, variant: IntentionVariant) -> StateTensor<f64> {
    let me = &w.agents[0];
    let records = ground_truth_records(w, 0);
    let enc = encode_intention::<f64>(&records, variant, &me.pose, 21, (N, N), w.agents.len()).unwrap();
    build_state_tensor(&omniscient(w, 0), me, &enc, variant, w.agents.len(), w, &TensorConfig::default()).unwrap()
}

#[test]
fn quarter_turns_leave_the_state_unchanged() {
    let spec = EnvironmentSpec::mini(Layout::SmallEmpty, Task::Foraging, 10, 10, 3);
    let mut r = common::rng(17);
    for seed in 0..6 {
        let mut w = generate_environment(&spec, &[RobotKind::Lifting; 3], seed).unwrap();
        for a in &mut w.agents {
            let c = a.cell();
            a.pose = Pose::at_cell(c, r.gen_range(-2..2) as f64 * FRAC_PI_2);
        }
        for id in 1..3 {
            let target = Action { channel: 0, col: r.gen_range(1..11), row: r.gen_range(1..11) };
            let belief = w.grid.clone();
            begin_primitive(&mut w, id, target, &belief).unwrap();
        }
        for variant in [IntentionVariant::RampPath, IntentionVariant::BinaryPath, IntentionVariant::PerRobotChannels] {
            let base = state(&w, variant);
            let mut turned = w.clone();
            for _ in 0..4 {
                turned = rotate_world(&turned);
                assert_eq!(state(&turned, variant), base, "seed {seed} {variant}");
            }
        }
        // Four quarter turns restore the world itself.
        let mut back = w.clone();
        for _ in 0..4 {
            back = rotate_world(&back);
        }
        assert_eq!(back.grid, w.grid);
        assert!(back.agents.iter().zip(&w.agents).all(|(a, b)| a.cell() == b.cell()));
        assert!((back.agents[0].pose.heading - w.agents[0].pose.heading).rem_euclid(2.0 * PI) < 1e-9);
    }
}
