use serde::{Deserialize, Serialize};

use super::grounding::frame_axes;
use super::{
    extract_context, orientation_phrase, parse_scale, resolve_scale, Correction, CorrectionError, Dependence,
    FrameResolution, HistoryEntry, InteractionHistory, Scale, CAP_STEP,
};
use crate::composer::{recompose, RecomposeInput};
use crate::dsl::{self, Program};
use crate::lm::{Frame, Gateway, Level, PromptKind, PromptRequest, Reply, Transcript};
use crate::planner::{replan, Plan, PlanContext};
use crate::sim::{detect, ObjectRecord, Vec3, WorldState};
use crate::skill::parse_skill;

/// How much history a low-level correction is interpreted against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// Slice chosen by the dependence class.
    #[default]
    Extractor,
    /// Every entry of the session.
    FullHistory,
    /// No history, world frame, fixed step: each correction is a fresh instruction.
    Ungrounded,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionConfig {
    pub mode: ContextMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Solution {
    Replan {
        plan: Plan,
        rationale: String,
    },
    NewProgram {
        program: String,
        resume_at: usize,
        interpretation: String,
        displacement: Option<[f64; 3]>,
        frame: Option<FrameResolution>,
        rationale: String,
    },
}

pub struct HandleInput<'a> {
    pub gateway: &'a Gateway,
    pub transcript: &'a mut Transcript,
    pub correction: &'a Correction,
    pub world: &'a WorldState,
    pub plan: &'a Plan,
    pub plan_context: &'a PlanContext,
    pub program: &'a Program,
    pub failed_statement: usize,
    pub history: &'a InteractionHistory,
}

/// Classification results are kept even when handling fails, so the history
/// records what was attempted.
#[derive(Clone, Debug, PartialEq)]
pub struct Handled {
    pub level: Option<Level>,
    pub dependence: Option<Dependence>,
    pub result: Result<Solution, CorrectionError>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CorrectionEngine {
    pub config: CorrectionConfig,
}

fn describe(entries: &[&HistoryEntry]) -> String {
    entries.iter().map(|e| e.describe()).collect::<Vec<_>>().join("\n")
}

fn target_object<'w>(skill: &str, world: &'w WorldState) -> Option<&'w ObjectRecord> {
    let intent = parse_skill(skill)?;
    detect(world, &intent.object).ok().and_then(|id| world.objects.get(&id))
}

fn vec_text(v: &Vec3) -> String {
    format!("[{}, {}, {}]", v.x + 0.0, v.y + 0.0, v.z + 0.0)
}

impl CorrectionEngine {
    pub fn new(config: CorrectionConfig) -> Self {
        CorrectionEngine { config }
    }

    pub fn handle(&self, input: HandleInput<'_>) -> Handled {
        let skill = input.plan.current().unwrap_or("").to_string();
        let level = match input.gateway.level(&input.correction.text, &skill, &input.plan.numbered(), input.transcript)
        {
            Ok(l) => l,
            Err(e) => return Handled { level: None, dependence: None, result: Err(e.into()) },
        };
        match level {
            Level::High => {
                let context = match self.config.mode {
                    ContextMode::FullHistory => describe(&input.history.entries.iter().collect::<Vec<_>>()),
                    _ => String::new(),
                };
                let result = replan(
                    input.gateway,
                    input.transcript,
                    input.plan_context,
                    input.plan,
                    &input.correction.text,
                    &context,
                    input.world,
                )
                .map(|plan| Solution::Replan { plan, rationale: "plan-level correction".into() })
                .map_err(CorrectionError::from);
                Handled { level: Some(level), dependence: None, result }
            }
            Level::Low => {
                let mut dependence = None;
                let result = self.low_level(input, &skill, &mut dependence);
                Handled { level: Some(level), dependence, result }
            }
        }
    }

    fn low_level(
        &self,
        input: HandleInput<'_>,
        skill: &str,
        dependence_out: &mut Option<Dependence>,
    ) -> Result<Solution, CorrectionError> {
        let text = input.correction.text.as_str();
        let ungrounded = self.config.mode == ContextMode::Ungrounded;
        let skill_entries = input.history.for_skill(input.correction.skill_index);
        let slice: Vec<&HistoryEntry> = if ungrounded {
            Vec::new()
        } else {
            let dependence = input.gateway.dependence(text, input.transcript)?;
            *dependence_out = Some(dependence);
            match self.config.mode {
                ContextMode::FullHistory => {
                    let all: Vec<&HistoryEntry> = input.history.entries.iter().collect();
                    if dependence != Dependence::None && all.is_empty() {
                        return Err(CorrectionError::EmptyHistory);
                    }
                    all
                }
                _ => extract_context(&skill_entries, dependence)?,
            }
        };
        let object = target_object(skill, input.world);
        let (requested, direction) = if ungrounded {
            let req = PromptRequest::new(PromptKind::FrameResolve)
                .with("correction", text)
                .with("object", "none")
                .with("normal", "none");
            match input.gateway.complete(&req, input.transcript)? {
                Reply::Frame(f) => (Frame::Absolute, f.direction),
                other => return Err(crate::lm::unexpected(PromptKind::FrameResolve, &other).into()),
            }
        } else {
            let normal = object.map(|o| vec_text(&o.normal)).unwrap_or_else(|| "unknown".into());
            let req = PromptRequest::new(PromptKind::FrameResolve)
                .with("correction", text)
                .with("object", object.map(|o| o.label.clone()).unwrap_or_default())
                .with("normal", normal);
            match input.gateway.complete(&req, input.transcript)? {
                Reply::Frame(f) => (f.frame, f.direction),
                other => return Err(crate::lm::unexpected(PromptKind::FrameResolve, &other).into()),
            }
        };
        let last = slice.iter().find_map(|e| e.displacement()).map(Vec3::from);
        let mut lines = Vec::new();
        let mut displacement = None;
        let mut frame_resolution = None;
        let mut program = input.program.clone();
        if let Some(d) = direction {
            let (frame, axes) = frame_axes(requested, object);
            let axis = axes.along(d);
            let magnitude = if ungrounded {
                match parse_scale(text) {
                    Some(Scale::Meters(m)) => m,
                    _ => CAP_STEP,
                }
            } else {
                resolve_scale(text, object, &axis, last.map(|v| v.norm()))?
            };
            let delta = axis * magnitude;
            displacement = Some(delta);
            frame_resolution = Some(FrameResolution {
                frame,
                object: object.filter(|_| frame == Frame::ObjectCentric).map(|o| o.id.clone()),
                axes,
                direction: d,
                displacement: delta,
            });
        } else if !ungrounded && parse_scale(text) == Some(Scale::Repeat) {
            displacement = Some(last.ok_or_else(|| CorrectionError::NoMagnitude(text.to_string()))?);
        }
        if let Some(delta) = displacement {
            lines.push(format!("grasp_offset += {}", vec_text(&delta)));
        }
        if let Some(o) = orientation_phrase(text) {
            lines.push(format!("grasp_orientation = {o}"));
        }
        let dependence = *dependence_out;
        if lines.is_empty() {
            match (dependence, slice.first()) {
                (Some(Dependence::Initial), Some(first)) => {
                    program = dsl::parse(&first.program).map_err(crate::composer::ComposeError::from)?;
                    lines.push("none".into());
                }
                _ => return Err(CorrectionError::NoDirection(text.to_string())),
            }
        }
        let interpretation = lines.join("; ");
        let (program, resume_at) = recompose(
            input.gateway,
            input.transcript,
            RecomposeInput {
                skill,
                program: &program,
                failed_statement: input.failed_statement,
                correction: text,
                context: &describe(&slice),
                interpretation: &interpretation,
            },
        )?;
        Ok(Solution::NewProgram {
            program: dsl::format(&program),
            resume_at,
            interpretation,
            displacement: displacement.map(|d| [d.x, d.y, d.z]),
            frame: frame_resolution,
            rationale: format!("skill-level correction, {} context entries", slice.len()),
        })
    }
}
