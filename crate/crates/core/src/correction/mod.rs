//! Correction handling: level and dependence routing, history slicing,
//! object-centric grounding of directions and vague distances.

mod grounding;
mod handler;
mod history;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grounding::{
    absolute_axes, frame_axes, object_axes, orientation_phrase, parse_scale, resolve_frame, resolve_scale, Axes,
    FrameResolution, Scale, CAP_STEP, LITTLE_BIT, TINY_BIT,
};
pub use history::{extract_context, Correction, HistoryEntry, InteractionHistory, SolutionRecord};

pub use handler::{ContextMode, CorrectionConfig, CorrectionEngine, HandleInput, Handled, Solution};

use crate::composer::ComposeError;
use crate::lm::LmError;
use crate::planner::PlanError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    Last,
    Initial,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    Human,
    ScriptedUser,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrectionError {
    #[error("correction needs earlier interactions in this skill, but there are none")]
    EmptyHistory,
    #[error("no direction could be read from {0:?}")]
    NoDirection(String),
    #[error("no distance could be read from {0:?}")]
    NoMagnitude(String),
    #[error("no object to ground the correction against: {0}")]
    NoObject(String),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}
