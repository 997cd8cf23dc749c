use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::CorrectionError;
use crate::lm::{Direction, Frame};
use crate::sim::{Approach, ObjectRecord, Vec3};
use crate::skill::normalize;

/// Fraction of the object's extent meant by "a little bit" / "a bit".
pub const LITTLE_BIT: f64 = 0.25;
/// Fraction of the object's extent meant by "a tiny bit".
pub const TINY_BIT: f64 = 0.10;
/// Fixed step used when corrections are handled without any grounding.
pub const CAP_STEP: f64 = 0.02;

const DEGENERATE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

impl Axes {
    pub fn along(&self, d: Direction) -> Vec3 {
        match d {
            Direction::Forward => self.forward,
            Direction::Backward => -self.forward,
            Direction::Right => self.right,
            Direction::Left => -self.right,
            Direction::Up => self.up,
            Direction::Down => -self.up,
        }
    }
}

pub fn absolute_axes() -> Axes {
    Axes { forward: Vec3::new(0.0, 1.0, 0.0), right: Vec3::new(1.0, 0.0, 0.0), up: Vec3::new(0.0, 0.0, 1.0) }
}

/// Frame facing into the object: forward is the inverted outward normal
/// flattened onto the table plane, up is world +z. `None` when the normal is
/// (close to) vertical.
pub fn object_axes(normal: &Vec3) -> Option<Axes> {
    let up = Vec3::new(0.0, 0.0, 1.0);
    let mut forward = -normal;
    forward.z = 0.0;
    if forward.norm() < DEGENERATE {
        return None;
    }
    forward /= forward.norm();
    let cross = forward.cross(&up);
    if cross.norm() < DEGENERATE {
        return None;
    }
    Some(Axes { forward, right: cross / cross.norm(), up })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResolution {
    pub frame: Frame,
    pub object: Option<String>,
    pub axes: Axes,
    pub direction: Direction,
    pub displacement: Vec3,
}

/// Pick the frame actually usable for `requested` and return it with its axes.
pub fn frame_axes(requested: Frame, object: Option<&ObjectRecord>) -> (Frame, Axes) {
    match (requested, object.and_then(|o| object_axes(&o.normal))) {
        (Frame::ObjectCentric, Some(axes)) => (Frame::ObjectCentric, axes),
        _ => (Frame::Absolute, absolute_axes()),
    }
}

pub fn resolve_frame(
    direction: Direction,
    requested: Frame,
    object: Option<&ObjectRecord>,
    magnitude: f64,
) -> FrameResolution {
    let (frame, axes) = frame_axes(requested, object);
    FrameResolution {
        frame,
        object: object.filter(|_| frame == Frame::ObjectCentric).map(|o| o.id.clone()),
        axes,
        direction,
        displacement: axes.along(direction) * magnitude,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Scale {
    Meters(f64),
    /// Fraction of the object's extent along the motion axis.
    Fraction(f64),
    /// Reuse the previous displacement magnitude.
    Repeat,
}

static QUANTITY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(\d+(?:\.\d+)?)\s*(millimeters?|millimetres?|centimeters?|centimetres?|meters?|metres?|mm|cm|m)\b")
        .expect("static")
});

fn contains_phrase(text: &str, phrase: &str) -> bool {
    format!(" {text} ").contains(&format!(" {phrase} "))
}

pub fn parse_scale(text: &str) -> Option<Scale> {
    let t = normalize(text).replace([',', '!', '.'], " ");
    let t = t.split_whitespace().collect::<Vec<_>>().join(" ");
    if let Some(c) = QUANTITY.captures(&t) {
        let value: f64 = c[1].parse().ok()?;
        let unit = match &c[2] {
            u if u.starts_with("mm") || u.starts_with("milli") => 0.001,
            u if u.starts_with("cm") || u.starts_with("centi") => 0.01,
            _ => 1.0,
        };
        return Some(Scale::Meters(value * unit));
    }
    if ["more", "keep going", "further", "again"].iter().any(|p| contains_phrase(&t, p)) {
        return Some(Scale::Repeat);
    }
    if ["a tiny bit", "tiny bit", "a tiny"].iter().any(|p| contains_phrase(&t, p)) {
        return Some(Scale::Fraction(TINY_BIT));
    }
    if ["a little bit", "a bit", "a little", "slightly", "little bit"].iter().any(|p| contains_phrase(&t, p)) {
        return Some(Scale::Fraction(LITTLE_BIT));
    }
    None
}

/// Distance in meters for a correction moving along `axis`.
pub fn resolve_scale(
    text: &str,
    object: Option<&ObjectRecord>,
    axis: &Vec3,
    last_magnitude: Option<f64>,
) -> Result<f64, CorrectionError> {
    match parse_scale(text) {
        Some(Scale::Meters(m)) => Ok(m),
        Some(Scale::Fraction(f)) => {
            let obj = object.ok_or_else(|| CorrectionError::NoObject(text.to_string()))?;
            Ok(f * obj.extent_along(axis))
        }
        Some(Scale::Repeat) => last_magnitude.ok_or_else(|| CorrectionError::NoMagnitude(text.to_string())),
        None => Err(CorrectionError::NoMagnitude(text.to_string())),
    }
}

/// Approach named by phrases such as "from the top".
pub fn orientation_phrase(text: &str) -> Option<Approach> {
    let t = normalize(text);
    [
        ("from the top", Approach::TopDown),
        ("from above", Approach::TopDown),
        ("from the front", Approach::Front),
        ("from the left", Approach::SideLeft),
        ("from the right", Approach::SideRight),
    ]
    .into_iter()
    .find(|(p, _)| t.contains(p))
    .map(|(_, a)| a)
}
