//! Deterministic tabletop world.
//!
//! The world is a plain value: every transition in [`apply`] takes a world by
//! reference and returns a new one, so two applications of the same primitive
//! to the same world always produce identical canonical serializations.

mod apply;
mod perception;
mod success;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use apply::{apply, Event, EventKind, PlaceTarget, Primitive};
pub use perception::{detect, label_tokens};
pub use success::skill_success;

pub type Vec3 = Vector3<f64>;

/// Default distance within which closing the gripper grasps an object.
pub const DEFAULT_GRASP_TOLERANCE: f64 = 0.015;
/// An articulated object counts as open at or above this fraction.
pub const OPEN_FRACTION: f64 = 0.6;
/// An articulated object counts as closed at or below this fraction.
pub const CLOSED_FRACTION: f64 = 0.1;

const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum SimError {
    #[error("target {0:?} is outside the workspace")]
    OutOfWorkspace([f64; 3]),
    #[error("invalid pull: {0}")]
    InvalidPull(String),
    #[error("invalid place: {0}")]
    InvalidPlace(String),
    #[error("no object matches {0:?}")]
    NotFound(String),
    #[error("{label:?} is ambiguous between {candidates:?}")]
    Ambiguous { label: String, candidates: Vec<String> },
    #[error("unknown object id {0:?}")]
    UnknownObject(String),
    #[error("unknown skill category in {0:?}")]
    UnknownSkillCategory(String),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
}

/// Gripper approach direction; a closed label set rather than a rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    TopDown,
    Front,
    SideLeft,
    SideRight,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::TopDown, Approach::Front, Approach::SideLeft, Approach::SideRight];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::TopDown => "top-down",
            Approach::Front => "front",
            Approach::SideLeft => "side-left",
            Approach::SideRight => "side-right",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Approach::ALL.into_iter().find(|a| a.as_str() == s.trim()).ok_or_else(|| format!("unknown orientation {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub approach: Approach,
    #[serde(default)]
    pub roll: f64,
}

impl Pose {
    pub fn new(position: Vec3, approach: Approach) -> Self {
        Pose { position, approach, roll: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prismatic {
    pub axis: Vec3,
    pub travel_max: f64,
    #[serde(default)]
    pub open_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub label: String,
    pub category: String,
    pub pose: Pose,
    pub extents: Vec3,
    pub normal: Vec3,
    /// Grasp point as an offset from the object origin.
    pub grasp_point: Vec3,
    pub grasp_orientation: Approach,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub articulation: Option<Prismatic>,
    #[serde(default)]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inside_of: Option<String>,
    #[serde(default)]
    pub feature: Vec<f64>,
}

impl ObjectRecord {
    pub fn grasp_point_world(&self) -> Vec3 {
        self.pose.position + self.grasp_point
    }

    /// Width of the bounding box measured along a unit direction.
    pub fn extent_along(&self, axis: &Vec3) -> f64 {
        axis.iter().zip(self.extents.iter()).map(|(a, e)| a.abs() * e).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aperture {
    Open,
    Closed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub pose: Pose,
    pub aperture: Aperture,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holding: Option<String>,
    /// Held object position minus gripper position, fixed at grasp time.
    #[serde(default = "Vec3::zeros")]
    pub hold_offset: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl Bounds {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - 1e-12 && p[i] <= self.max[i] + 1e-12)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: BTreeMap<String, ObjectRecord>,
    pub gripper: GripperState,
    pub workspace: Bounds,
    #[serde(default)]
    pub tick: u64,
    #[serde(default = "default_grasp_tolerance")]
    pub grasp_tolerance: f64,
}

fn default_grasp_tolerance() -> f64 {
    DEFAULT_GRASP_TOLERANCE
}

impl WorldState {
    pub fn object(&self, id: &str) -> Result<&ObjectRecord, SimError> {
        self.objects.get(id).ok_or_else(|| SimError::UnknownObject(id.to_string()))
    }

    /// Canonical serialization used for determinism checks.
    pub fn canonical(&self) -> String {
        crate::canonical::to_string(self).expect("world state always serializes")
    }

    /// Object states as planner prompts show them, e.g. "top drawer(closed), salt(in bottom drawer)".
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        for o in self.objects.values() {
            if let Some(a) = &o.articulation {
                let s = if a.open_fraction >= OPEN_FRACTION { "open" } else { "closed" };
                parts.push(format!("{}({s})", o.label));
            }
            if self.gripper.holding.as_deref() == Some(o.id.as_str()) {
                parts.push(format!("{}(in gripper)", o.label));
            } else if let Some(c) = o.inside_of.as_ref().and_then(|c| self.objects.get(c)) {
                parts.push(format!("{}(in {})", o.label, c.label));
            }
        }
        parts.join(", ")
    }

    /// Fill `contains` lists from `inside_of` links so the two stay consistent.
    pub fn link_containment(&mut self) {
        for obj in self.objects.values_mut() {
            obj.contains.clear();
        }
        let links: Vec<(String, String)> =
            self.objects.values().filter_map(|o| o.inside_of.clone().map(|c| (c, o.id.clone()))).collect();
        for (container, child) in links {
            if let Some(c) = self.objects.get_mut(&container) {
                c.contains.push(child);
            }
        }
        for obj in self.objects.values_mut() {
            obj.contains.sort();
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidWorld(m));
        if !(0..3).all(|i| self.workspace.min[i] < self.workspace.max[i]) {
            return bad("workspace bounds are empty".into());
        }
        if !self.workspace.contains(&self.gripper.pose.position) {
            return bad("gripper outside workspace".into());
        }
        if self.gripper.holding.is_some() && self.gripper.aperture != Aperture::Closed {
            return bad("gripper holds an object while open".into());
        }
        for (id, o) in &self.objects {
            if id != &o.id {
                return bad(format!("object key {id} does not match id {}", o.id));
            }
            let p = &o.pose;
            if !p.position.iter().all(|x| x.is_finite()) {
                return bad(format!("{id}: non-finite position"));
            }
            if !(-180.0..=180.0).contains(&p.roll) {
                return bad(format!("{id}: roll out of range"));
            }
            if !self.workspace.contains(&p.position) {
                return bad(format!("{id}: outside workspace"));
            }
            if (o.normal.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return bad(format!("{id}: normal is not unit length"));
            }
            if o.extents.iter().any(|e| *e <= 0.0) {
                return bad(format!("{id}: extents must be positive"));
            }
            if let Some(a) = &o.articulation {
                if !(0.0..=1.0).contains(&a.open_fraction) {
                    return bad(format!("{id}: open_fraction out of range"));
                }
                if (a.axis.norm() - 1.0).abs() > UNIT_TOLERANCE || a.travel_max <= 0.0 {
                    return bad(format!("{id}: bad articulation"));
                }
            }
            if let Some(c) = &o.inside_of {
                match self.objects.get(c) {
                    Some(container) if container.contains.contains(id) => {}
                    _ => return bad(format!("{id}: inside_of {c} not mirrored")),
                }
            }
            for child in &o.contains {
                match self.objects.get(child) {
                    Some(ch) if ch.inside_of.as_deref() == Some(id.as_str()) => {}
                    _ => return bad(format!("{id}: contains {child} not mirrored")),
                }
            }
        }
        Ok(())
    }
}
