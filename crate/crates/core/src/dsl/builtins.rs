use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Detect,
    MoveTo,
    MoveBy,
    Rotate,
    OpenGripper,
    CloseGripper,
    Grasp,
    Pull,
    Place,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Str,
    Number,
    Vector,
    Object,
    Orientation,
    ObjectOrVector,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Str => "a string",
            ParamKind::Number => "a number",
            ParamKind::Vector => "a 3-vector",
            ParamKind::Object => "an object identifier",
            ParamKind::Orientation => "an orientation label",
            ParamKind::ObjectOrVector => "an object identifier or a 3-vector",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Param {
    pub name: &'static str,
    pub kind: ParamKind,
    pub required: bool,
}

const fn req(name: &'static str, kind: ParamKind) -> Param {
    Param { name, kind, required: true }
}

const fn opt(name: &'static str, kind: ParamKind) -> Param {
    Param { name, kind, required: false }
}

use ParamKind::*;

impl Builtin {
    pub const ALL: [Builtin; 9] = [
        Builtin::Detect,
        Builtin::MoveTo,
        Builtin::MoveBy,
        Builtin::Rotate,
        Builtin::OpenGripper,
        Builtin::CloseGripper,
        Builtin::Grasp,
        Builtin::Pull,
        Builtin::Place,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Detect => "detect",
            Builtin::MoveTo => "move_to",
            Builtin::MoveBy => "move_by",
            Builtin::Rotate => "rotate",
            Builtin::OpenGripper => "open_gripper",
            Builtin::CloseGripper => "close_gripper",
            Builtin::Grasp => "grasp",
            Builtin::Pull => "pull",
            Builtin::Place => "place",
        }
    }

    pub fn params(self) -> &'static [Param] {
        const DETECT: &[Param] = &[req("label", Str)];
        const MOVE_TO: &[Param] = &[req("position", Vector), opt("orientation", Orientation)];
        const MOVE_BY: &[Param] = &[req("delta", Vector)];
        const ROTATE: &[Param] = &[req("orientation", Orientation)];
        const GRASP: &[Param] = &[req("object", Object), opt("offset", Vector), opt("orientation", Orientation)];
        const PULL: &[Param] = &[req("object", Object), req("distance", Number), opt("direction", Vector)];
        const PLACE: &[Param] = &[req("object", Object), req("target", ObjectOrVector)];
        match self {
            Builtin::Detect => DETECT,
            Builtin::MoveTo => MOVE_TO,
            Builtin::MoveBy => MOVE_BY,
            Builtin::Rotate => ROTATE,
            Builtin::OpenGripper | Builtin::CloseGripper => &[],
            Builtin::Grasp => GRASP,
            Builtin::Pull => PULL,
            Builtin::Place => PLACE,
        }
    }

    /// Whether the command produces a value that can be bound.
    pub fn returns_object(self) -> bool {
        self == Builtin::Detect
    }

    /// One-line reference used in composer prompts.
    pub fn signature(self) -> String {
        let params: Vec<String> = self
            .params()
            .iter()
            .map(|p| if p.required { p.name.to_string() } else { format!("{}=?", p.name) })
            .collect();
        format!("{}({})", self.name(), params.join(", "))
    }
}

impl FromStr for Builtin {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Builtin::ALL.into_iter().find(|b| b.name() == s).ok_or(())
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
