use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gridcore::{
    bresenham_line, egocentric_crop, rasterize_constant_path, rasterize_ramp_path_into, world_to_ego, CellCoord, Pose,
    RampSpec, ScalarMap,
};
use crate::scalar::Scalar;

use super::belief::HISTORY_CAPACITY;

/// How other agents' intentions appear in the state tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntentionVariant {
    RampPath,
    BinaryPath,
    StraightLine,
    TargetCircle,
    PerRobotChannels,
    NonspatialTiled,
    HistoryMap,
    /// Intention map produced by a learned predictor, optionally with the
    /// history map as an extra input channel.
    Predicted { history: bool },
    None,
}

impl IntentionVariant {
    /// Column order used by comparison tables.
    pub const ALL: [IntentionVariant; 10] = [
        IntentionVariant::RampPath,
        IntentionVariant::BinaryPath,
        IntentionVariant::StraightLine,
        IntentionVariant::TargetCircle,
        IntentionVariant::PerRobotChannels,
        IntentionVariant::NonspatialTiled,
        IntentionVariant::None,
        IntentionVariant::HistoryMap,
        IntentionVariant::Predicted { history: false },
        IntentionVariant::Predicted { history: true },
    ];

    pub fn tag(self) -> &'static str {
        match self {
            IntentionVariant::RampPath => "ramp_path",
            IntentionVariant::BinaryPath => "binary_path",
            IntentionVariant::StraightLine => "straight_line",
            IntentionVariant::TargetCircle => "target_circle",
            IntentionVariant::PerRobotChannels => "per_robot_channels",
            IntentionVariant::NonspatialTiled => "nonspatial_tiled",
            IntentionVariant::HistoryMap => "history_map",
            IntentionVariant::Predicted { history: false } => "predicted",
            IntentionVariant::Predicted { history: true } => "predicted_history",
            IntentionVariant::None => "none",
        }
    }

    /// Channels this variant contributes to the state tensor.
    pub fn channels(self, team_size: usize) -> usize {
        let others = team_size.saturating_sub(1);
        match self {
            IntentionVariant::PerRobotChannels => others.max(1),
            IntentionVariant::NonspatialTiled => 2 * others.max(1),
            IntentionVariant::Predicted { history: true } => 2,
            _ => 1,
        }
    }

    /// Whether agents need to broadcast their paths for this variant.
    pub fn uses_communication(self) -> bool {
        !matches!(self, IntentionVariant::HistoryMap | IntentionVariant::None)
    }

    pub fn is_predicted(self) -> bool {
        matches!(self, IntentionVariant::Predicted { .. })
    }
}

impl fmt::Display for IntentionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for IntentionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IntentionVariant::ALL.into_iter().find(|v| v.tag() == s).ok_or_else(|| {
            let tags: Vec<_> = IntentionVariant::ALL.iter().map(|v| v.tag()).collect();
            Error::input(format!("unknown intention variant {s:?}, expected one of {}", tags.join(", ")))
        })
    }
}

impl Serialize for IntentionVariant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for IntentionVariant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What the deciding agent knows about another agent's intention.
#[derive(Clone, Debug, PartialEq)]
pub struct IntentionRecord {
    pub agent_id: usize,
    pub pose: Pose,
    /// Remaining planned cells; the last one is the target.
    pub waypoints: Vec<CellCoord>,
    /// Observed poses, newest last.
    pub history: Vec<Pose>,
}

impl IntentionRecord {
    pub fn target(&self) -> Option<CellCoord> {
        self.waypoints.last().copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IntentionEncoding<T> {
    /// Egocentric maps, one per channel.
    Maps(Vec<ScalarMap<T>>),
    /// Per-channel constants in [-1, 1].
    Flat(Vec<T>),
}

impl<T: Scalar> IntentionEncoding<T> {
    pub fn channels(&self) -> usize {
        match self {
            IntentionEncoding::Maps(m) => m.len(),
            IntentionEncoding::Flat(v) => v.len(),
        }
    }
}

fn nearest_first<'a>(records: &'a [IntentionRecord], frame: &Pose) -> Vec<&'a IntentionRecord> {
    let mut sorted: Vec<_> = records.iter().collect();
    let dist = |r: &IntentionRecord| (r.pose.x - frame.x).hypot(r.pose.y - frame.y);
    sorted.sort_by(|a, b| dist(a).total_cmp(&dist(b)).then(a.agent_id.cmp(&b.agent_id)));
    sorted
}

fn disc<T: Scalar>(canvas: &mut ScalarMap<T>, center: CellCoord, radius: f64) {
    let r = radius.ceil() as i64;
    for dr in -r..=r {
        for dc in -r..=r {
            if ((dc * dc + dr * dr) as f64).sqrt() > radius {
                continue;
            }
            if let Some(c) = center.offset(dc, dr).filter(|c| canvas.contains(*c)) {
                canvas.set(c, T::one());
            }
        }
    }
}

fn check_path(canvas_w: usize, canvas_h: usize, r: &IntentionRecord) -> Result<()> {
    match r.waypoints.iter().find(|c| c.col >= canvas_w || c.row >= canvas_h) {
        Some(c) => Err(Error::input(format!("agent {} waypoint {c} outside grid", r.agent_id))),
        None => Ok(()),
    }
}

/// Encodes other agents' intentions in the egocentric frame of `frame`.
///
/// `canvas` is the world grid size. Records for the deciding agent itself
/// must not be passed. `Predicted` variants encode the communicated ramp
/// path, which is what the predictor learns to reproduce.
pub fn encode_intention<T: Scalar>(
    records: &[IntentionRecord],
    variant: IntentionVariant,
    frame: &Pose,
    out_size: usize,
    canvas: (usize, usize),
    team_size: usize,
) -> Result<IntentionEncoding<T>> {
    let (w, h) = canvas;
    for r in records {
        check_path(w, h, r)?;
    }
    let ramp = RampSpec::for_crop(out_size);
    let crop = |m: &ScalarMap<T>| egocentric_crop(m, frame, out_size, T::zero());
    let single = |paint: &dyn Fn(&mut ScalarMap<T>) -> Result<()>| -> Result<IntentionEncoding<T>> {
        let mut m = ScalarMap::zeros(w, h)?;
        paint(&mut m)?;
        Ok(IntentionEncoding::Maps(vec![crop(&m)?]))
    };
    let slots = team_size.saturating_sub(1).max(1);
    match variant {
        IntentionVariant::RampPath | IntentionVariant::Predicted { .. } => single(&|m| {
            records.iter().try_for_each(|r| rasterize_ramp_path_into(m, &r.waypoints, &ramp))
        }),
        IntentionVariant::BinaryPath => single(&|m| {
            records.iter().try_for_each(|r| rasterize_constant_path(m, &r.waypoints, T::one()))
        }),
        IntentionVariant::StraightLine => single(&|m| {
            for r in records {
                let (Some(start), Some(target)) = (r.pose.cell(), r.target()) else { continue };
                rasterize_ramp_path_into(m, &bresenham_line(start, target), &ramp)?;
            }
            Ok(())
        }),
        IntentionVariant::TargetCircle => single(&|m| {
            for t in records.iter().filter_map(IntentionRecord::target) {
                disc(m, t, 2.0);
            }
            Ok(())
        }),
        IntentionVariant::HistoryMap => single(&|m| {
            for r in records {
                for (k, p) in r.history.iter().rev().take(HISTORY_CAPACITY).enumerate() {
                    let Some(c) = p.cell().filter(|c| m.contains(*c)) else { continue };
                    let v = T::lit(1.0 - k as f64 / HISTORY_CAPACITY as f64);
                    if v > m.get(c) {
                        m.set(c, v);
                    }
                }
            }
            Ok(())
        }),
        IntentionVariant::PerRobotChannels => {
            let mut maps = Vec::with_capacity(slots);
            for r in nearest_first(records, frame).into_iter().take(slots) {
                let mut m = ScalarMap::zeros(w, h)?;
                rasterize_ramp_path_into(&mut m, &r.waypoints, &ramp)?;
                maps.push(crop(&m)?);
            }
            while maps.len() < slots {
                maps.push(ScalarMap::zeros(out_size, out_size)?);
            }
            Ok(IntentionEncoding::Maps(maps))
        }
        IntentionVariant::NonspatialTiled => {
            let half = (out_size / 2).max(1) as f64;
            let mut values = Vec::with_capacity(2 * slots);
            for r in nearest_first(records, frame).into_iter().take(slots) {
                let (right, forward) = r.target().map_or((0.0, 0.0), |t| world_to_ego(frame, t));
                values.push(T::lit((right / half).clamp(-1.0, 1.0)));
                values.push(T::lit((forward / half).clamp(-1.0, 1.0)));
            }
            values.resize(2 * slots, T::zero());
            Ok(IntentionEncoding::Flat(values))
        }
        IntentionVariant::None => Ok(IntentionEncoding::Maps(vec![ScalarMap::zeros(out_size, out_size)?])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn record(id: usize, at: (usize, usize), path: &[(usize, usize)]) -> IntentionRecord {
        IntentionRecord {
            agent_id: id,
            pose: Pose::at_cell(CellCoord::new(at.0, at.1), 0.0),
            waypoints: path.iter().map(|&(c, r)| CellCoord::new(c, r)).collect(),
            history: vec![],
        }
    }

    #[test]
    fn tags_round_trip() {
        for v in IntentionVariant::ALL {
            assert_eq!(v.tag().parse::<IntentionVariant>().unwrap(), v);
        }
        assert!("bogus".parse::<IntentionVariant>().is_err());
    }

    #[test]
    fn ramp_starts_at_one_under_the_agent() {
        let frame = Pose::at_cell(CellCoord::new(5, 5), FRAC_PI_2);
        let r = record(1, (5, 5), &[(5, 5), (6, 5), (7, 5)]);
        let IntentionEncoding::Maps(m) = encode_intention::<f64>(&[r], IntentionVariant::RampPath, &frame, 11, (12, 12), 2).unwrap()
        else {
            panic!()
        };
        assert_eq!(m[0].get(CellCoord::new(5, 5)), 1.0);
        assert!(m[0].get(CellCoord::new(7, 5)) < m[0].get(CellCoord::new(6, 5)));
    }

    #[test]
    fn per_robot_channels_are_nearest_first_and_padded() {
        let frame = Pose::at_cell(CellCoord::new(1, 1), FRAC_PI_2);
        let far = record(1, (9, 9), &[(9, 9)]);
        let near = record(2, (2, 1), &[(2, 1)]);
        let enc = encode_intention::<f64>(&[far, near], IntentionVariant::PerRobotChannels, &frame, 11, (12, 12), 4).unwrap();
        let IntentionEncoding::Maps(m) = enc else { panic!() };
        assert_eq!(m.len(), 3);
        assert_eq!(m[0].get(CellCoord::new(6, 5)), 1.0);
        assert!(m[2].values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonspatial_values_are_bounded() {
        let frame = Pose::at_cell(CellCoord::new(1, 1), FRAC_PI_2);
        let r = record(1, (3, 3), &[(3, 3), (30, 30)]);
        let enc = encode_intention::<f64>(&[r], IntentionVariant::NonspatialTiled, &frame, 11, (40, 40), 3).unwrap();
        let IntentionEncoding::Flat(v) = enc else { panic!() };
        assert_eq!(v, vec![1.0, 1.0, 0.0, 0.0]);
    }
}
