use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    SmallEmpty,
    SmallDivider,
    LargeEmpty,
    LargeDoors,
    LargeTunnels,
    LargeRooms,
}

impl Layout {
    pub const ALL: [Layout; 6] = [
        Layout::SmallEmpty,
        Layout::SmallDivider,
        Layout::LargeEmpty,
        Layout::LargeDoors,
        Layout::LargeTunnels,
        Layout::LargeRooms,
    ];

    pub fn is_small(self) -> bool {
        matches!(self, Layout::SmallEmpty | Layout::SmallDivider)
    }

    /// Interior size (width, height) in cells.
    pub fn default_dims(self) -> Dims {
        if self.is_small() {
            Dims { width: 20, height: 20 }
        } else {
            Dims { width: 40, height: 20 }
        }
    }

    pub fn default_num_objects(self) -> usize {
        if self.is_small() {
            10
        } else {
            20
        }
    }

    /// Robots start on the opposite side of the partition from the objects.
    pub fn opposite_sides(self) -> bool {
        matches!(self, Layout::SmallDivider | Layout::LargeDoors | Layout::LargeTunnels)
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Layout::ALL
            .into_iter()
            .find(|l| l.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown layout {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    Foraging,
    SearchAndRescue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

/// How training episodes pick their layout seeds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Seeds drawn from entropy; the draw is recorded in run metadata.
    #[default]
    Unseeded,
    Fixed(u64),
}

fn default_kappa() -> f64 {
    0.01
}
fn default_effector_radius() -> f64 {
    1.5
}
fn default_rescue_radius() -> f64 {
    1.5
}
fn default_throw_range() -> usize {
    10
}
fn default_sensor_fov() -> f64 {
    2.0 * PI / 3.0
}
fn default_sensor_range() -> f64 {
    10.0
}
fn default_no_progress_limit() -> usize {
    400
}

/// Environment description, loadable from JSON. Unset optional fields take
/// the layout's defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub layout: Layout,
    #[serde(default)]
    pub dims: Option<Dims>,
    #[serde(default)]
    pub num_objects: Option<usize>,
    #[serde(default)]
    pub seed_policy: SeedPolicy,
    pub task: Task,
    /// Distance-shaping reward per cell of object progress.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Lift and throw lock-on radius.
    #[serde(default = "default_effector_radius")]
    pub effector_radius: f64,
    #[serde(default = "default_rescue_radius")]
    pub rescue_radius: f64,
    #[serde(default = "default_throw_range")]
    pub throw_range: usize,
    #[serde(default = "default_sensor_fov")]
    pub sensor_fov: f64,
    #[serde(default = "default_sensor_range")]
    pub sensor_range: f64,
    /// Episode ends after this many decisions without a removal.
    #[serde(default = "default_no_progress_limit")]
    pub no_progress_limit: usize,
}

impl EnvironmentSpec {
    pub fn new(layout: Layout, task: Task) -> Self {
        EnvironmentSpec {
            layout,
            dims: None,
            num_objects: None,
            seed_policy: SeedPolicy::Unseeded,
            task,
            kappa: default_kappa(),
            effector_radius: default_effector_radius(),
            rescue_radius: default_rescue_radius(),
            throw_range: default_throw_range(),
            sensor_fov: default_sensor_fov(),
            sensor_range: default_sensor_range(),
            no_progress_limit: default_no_progress_limit(),
        }
    }

    /// Reduced-size variant of a layout.
    pub fn mini(layout: Layout, task: Task, width: usize, height: usize, num_objects: usize) -> Self {
        EnvironmentSpec {
            dims: Some(Dims { width, height }),
            num_objects: Some(num_objects),
            ..EnvironmentSpec::new(layout, task)
        }
    }

    pub fn interior(&self) -> Dims {
        self.dims.unwrap_or_else(|| self.layout.default_dims())
    }

    pub fn object_count(&self) -> usize {
        self.num_objects.unwrap_or_else(|| self.layout.default_num_objects())
    }

    pub fn has_receptacle(&self) -> bool {
        self.task == Task::Foraging
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.interior();
        if d.width < 6 || d.height < 6 {
            return Err(Error::config(format!("interior {}x{} is below the 6x6 minimum", d.width, d.height)));
        }
        if self.object_count() == 0 {
            return Err(Error::config("num_objects must be at least 1"));
        }
        if self.dims.is_none() && self.object_count() != self.layout.default_num_objects() {
            return Err(Error::config(format!(
                "{} at default size holds {} objects, got {}",
                self.layout,
                self.layout.default_num_objects(),
                self.object_count()
            )));
        }
        if !(self.effector_radius > 0.0 && self.rescue_radius > 0.0) {
            return Err(Error::config("effector radii must be positive"));
        }
        if !(self.sensor_fov > 0.0 && self.sensor_fov <= 2.0 * PI + 1e-12 && self.sensor_range > 0.0) {
            return Err(Error::config("sensor field of view must lie in (0, 2π] and range be positive"));
        }
        if !self.kappa.is_finite() || self.no_progress_limit == 0 {
            return Err(Error::config("kappa must be finite and no_progress_limit positive"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: EnvironmentSpec = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_defaults() {
        let spec = EnvironmentSpec::from_json(r#"{"layout":"SmallEmpty","task":"Foraging"}"#).unwrap();
        assert_eq!(spec.object_count(), 10);
        assert_eq!(spec.interior(), Dims { width: 20, height: 20 });
        assert_eq!(spec.kappa, 0.01);
        assert_eq!(spec.effector_radius, 1.5);
        let large = EnvironmentSpec::new(Layout::LargeRooms, Task::Foraging);
        assert_eq!(large.object_count(), 20);
        assert_eq!(large.interior(), Dims { width: 40, height: 20 });
    }

    #[test]
    fn full_document_roundtrip() {
        let spec = EnvironmentSpec::mini(Layout::SmallDivider, Task::Foraging, 12, 12, 4);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(EnvironmentSpec::from_json(&text).unwrap(), spec);
    }

    #[test]
    fn object_count_must_match_size_class() {
        let err = EnvironmentSpec::from_json(r#"{"layout":"SmallEmpty","task":"Foraging","num_objects":3}"#);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(EnvironmentSpec::from_json(r#"{"layout":"Nowhere","task":"Foraging"}"#).is_err());
    }
}
