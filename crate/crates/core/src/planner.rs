//! Task planning: instruction to an ordered list of skill descriptions, and
//! suffix replanning after plan-level corrections.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{Gateway, LmError, PromptKind, PromptRequest, Reply, Transcript};
use crate::sim::{label_tokens, WorldState};

pub const BUILTIN_CONSTRAINTS: [&str; 2] = [
    "The robot should manipulate one object and only move its gripper once in each sub-task.",
    "If the instruction is ambiguous, first refer to the constraints to see whether you can replace the ambiguous reference; if not just leave it as is.",
];

/// Categories that hold things rather than being carried.
const RECEPTACLES: &[&str] = &[
    "drawer",
    "shelf",
    "rack",
    "fridge",
    "table",
    "cabinet",
    "mat",
    "board",
    "box",
    "bin",
    "basket",
    "counter",
    "microwave",
    "stove",
    "sink",
    "tray",
];
const DESTINATION_WORDS: &[&str] = &["into", "in", "on", "onto", "inside", "to", "from", "with", "under", "at"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "key")]
pub enum ConstraintSource {
    Builtin,
    Knowledge(String),
    Scenario,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub text: String,
    pub source: ConstraintSource,
}

/// Builtin constraints first, then distilled ones in insertion order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    items: Vec<Constraint>,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        ConstraintSet {
            items: BUILTIN_CONSTRAINTS
                .iter()
                .map(|t| Constraint { text: t.to_string(), source: ConstraintSource::Builtin })
                .collect(),
        }
    }
}

impl ConstraintSet {
    pub fn push(&mut self, text: &str, source: ConstraintSource) {
        let t = text.trim();
        if t.is_empty() || self.items.iter().any(|c| c.text.eq_ignore_ascii_case(t)) {
            return;
        }
        self.items.push(Constraint { text: t.to_string(), source });
    }

    pub fn all(&self) -> &[Constraint] {
        &self.items
    }

    pub fn extra(&self) -> impl Iterator<Item = &Constraint> {
        self.items.iter().filter(|c| c.source != ConstraintSource::Builtin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub instruction: String,
    pub skills: Vec<String>,
    pub constraints_used: Vec<String>,
    pub cursor: usize,
}

impl Plan {
    pub fn current(&self) -> Option<&str> {
        self.skills.get(self.cursor).map(String::as_str)
    }

    pub fn completed(&self) -> &[String] {
        &self.skills[..self.cursor.min(self.skills.len())]
    }

    pub fn numbered(&self) -> String {
        self.skills.iter().enumerate().map(|(i, s)| format!("{}: \"{s}\"", i + 1)).collect::<Vec<_>>().join(", ")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("empty instruction")]
    EmptyInstruction,
    #[error("sub-task {skill:?} manipulates more than one object: {objects:?}")]
    PlanInvalid { skill: String, objects: Vec<String> },
    #[error(transparent)]
    Lm(#[from] LmError),
}

/// Everything the planner prompt is conditioned on.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanContext {
    pub instruction: String,
    pub object_state: String,
    pub constraints: ConstraintSet,
    pub retrieved: String,
}

impl PlanContext {
    fn request(&self, kind: PromptKind) -> PromptRequest {
        let extra: Vec<&str> = self.constraints.extra().map(|c| c.text.as_str()).collect();
        PromptRequest::new(kind)
            .with("instruction", self.instruction.trim())
            .with("object_state", self.object_state.trim())
            .with("constraints", extra.join("\n"))
            .with("retrieved", self.retrieved.trim())
    }

    fn used(&self) -> Vec<String> {
        self.constraints.extra().map(|c| c.text.clone()).collect()
    }
}

/// Movable scene objects named in the part of a skill before its destination.
pub fn manipulated_objects(skill: &str, world: &WorldState) -> Vec<String> {
    let tokens = label_tokens(skill);
    let head: Vec<&String> = match tokens.iter().skip(1).position(|t| DESTINATION_WORDS.contains(&t.as_str())) {
        Some(p) => tokens[..p + 1].iter().collect(),
        None => tokens.iter().collect(),
    };
    let head: BTreeSet<&str> = head.into_iter().map(String::as_str).collect();
    let matches: Vec<(BTreeSet<String>, String)> = world
        .objects
        .values()
        .filter(|o| o.articulation.is_none() && !RECEPTACLES.contains(&o.category.to_lowercase().as_str()))
        .filter_map(|o| {
            let l: BTreeSet<String> = label_tokens(&o.label).into_iter().collect();
            (!l.is_empty() && l.iter().all(|t| head.contains(t.as_str()))).then(|| (l, o.label.clone()))
        })
        .collect();
    // keep only maximal matches, so "red mug" does not also count "mug"
    let mut out: Vec<String> = matches
        .iter()
        .filter(|(l, _)| !matches.iter().any(|(m, _)| m.len() > l.len() && l.is_subset(m)))
        .map(|(_, label)| label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    out.dedup();
    out
}

pub fn validate(skills: &[String], world: &WorldState) -> Result<(), PlanError> {
    for s in skills {
        let objects = manipulated_objects(s, world);
        if objects.len() > 1 {
            return Err(PlanError::PlanInvalid { skill: s.clone(), objects });
        }
    }
    Ok(())
}

fn skills_of(reply: Reply, kind: PromptKind) -> Result<Vec<String>, PlanError> {
    match reply {
        Reply::Plan(s) => Ok(s),
        other => Err(crate::lm::unexpected(kind, &other).into()),
    }
}

pub fn plan(
    gateway: &Gateway,
    transcript: &mut Transcript,
    ctx: &PlanContext,
    world: &WorldState,
) -> Result<Plan, PlanError> {
    if ctx.instruction.trim().is_empty() {
        return Err(PlanError::EmptyInstruction);
    }
    let skills = skills_of(gateway.complete(&ctx.request(PromptKind::Plan), transcript)?, PromptKind::Plan)?;
    validate(&skills, world)?;
    Ok(Plan { instruction: ctx.instruction.clone(), skills, constraints_used: ctx.used(), cursor: 0 })
}

/// Regenerate the remaining sub-tasks. Completed ones are kept as they are.
pub fn replan(
    gateway: &Gateway,
    transcript: &mut Transcript,
    ctx: &PlanContext,
    current: &Plan,
    correction: &str,
    history: &str,
    world: &WorldState,
) -> Result<Plan, PlanError> {
    let req = ctx
        .request(PromptKind::Replan)
        .with("original_plan", current.numbered())
        .with("current_skill", current.current().unwrap_or(""))
        .with("completed", current.completed().join("\n"))
        .with("correction", correction.trim())
        .with("context", history);
    let suffix = skills_of(gateway.complete(&req, transcript)?, PromptKind::Replan)?;
    validate(&suffix, world)?;
    let mut skills = current.completed().to_vec();
    skills.extend(suffix);
    let mut used = ctx.used();
    if !used.iter().any(|u| u.eq_ignore_ascii_case(correction.trim())) {
        used.push(correction.trim().to_string());
    }
    Ok(Plan { instruction: current.instruction.clone(), skills, constraints_used: used, cursor: current.cursor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{BackendRules, PlanRule, PlanVariant};
    use crate::sim::fixtures::{desk, item};
    use crate::sim::Vec3;

    fn fig1_gateway() -> Gateway {
        Gateway::scripted(BackendRules {
            plans: vec![PlanRule {
                instruction: "put the scissors in the top drawer".into(),
                skills: vec!["Pick up the scissors".into(), "Put the scissors into the top drawer".into()],
                variants: vec![PlanVariant {
                    when_all: vec![],
                    when_any: vec!["open the drawer first".into()],
                    skills: vec![
                        "Open the top drawer".into(),
                        "Pick up the scissors".into(),
                        "Put the scissors into the top drawer".into(),
                    ],
                }],
            }],
            ..Default::default()
        })
    }

    fn ctx(instruction: &str) -> PlanContext {
        PlanContext { instruction: instruction.into(), object_state: "top drawer(closed)".into(), ..Default::default() }
    }

    #[test]
    fn atomic_instruction_plans_itself() {
        let gw = Gateway::scripted(BackendRules::default());
        let p = plan(&gw, &mut Transcript::default(), &ctx("open the top drawer"), &desk()).unwrap();
        assert_eq!(p.skills, vec!["Open the top drawer"]);
        assert_eq!(p.cursor, 0);
    }

    #[test]
    fn replan_puts_opening_first() {
        let gw = fig1_gateway();
        let mut t = Transcript::default();
        let c = ctx("put the scissors in the top drawer");
        let p = plan(&gw, &mut t, &c, &desk()).unwrap();
        assert_eq!(p.skills[0], "Pick up the scissors");
        let r = replan(&gw, &mut t, &c, &p, "You should open the drawer first", "", &desk()).unwrap();
        assert_eq!(r.skills[0], "Open the top drawer");
        assert_eq!(r.skills.len(), 3);
        assert_eq!(r.constraints_used, vec!["You should open the drawer first"]);
        // restating the corrected plan changes nothing
        let again = replan(&gw, &mut t, &c, &r, "You should open the drawer first", "", &desk()).unwrap();
        assert_eq!(again.skills, r.skills);
    }

    #[test]
    fn replan_preserves_completed_skills() {
        let gw = fig1_gateway();
        let mut t = Transcript::default();
        let c = ctx("put the scissors in the top drawer");
        let mut p = Plan {
            instruction: c.instruction.clone(),
            skills: vec!["Open the top drawer".into(), "Pick up the scissors".into()],
            constraints_used: vec![],
            cursor: 1,
        };
        p = replan(&gw, &mut t, &c, &p, "You should open the drawer first", "", &desk()).unwrap();
        assert_eq!(
            p.skills,
            vec!["Open the top drawer", "Pick up the scissors", "Put the scissors into the top drawer"]
        );
        assert_eq!(p.cursor, 1);
    }

    #[test]
    fn two_objects_in_one_skill_is_invalid() {
        let mut w = desk();
        let mug = item("mug", "mug", "mug", Vec3::new(0.2, 0.1, 0.05));
        let red = item("red_mug", "red mug", "mug", Vec3::new(0.3, 0.1, 0.05));
        w.objects.insert(mug.id.clone(), mug);
        w.objects.insert(red.id.clone(), red);
        assert_eq!(manipulated_objects("Pick up the red mug", &w), vec!["red mug"]);
        assert!(manipulated_objects("Put the scissors into the top drawer", &w).len() == 1);
        assert!(matches!(
            validate(&["Pick up the scissors and the mug".into()], &w),
            Err(PlanError::PlanInvalid { .. })
        ));
    }

    #[test]
    fn builtin_constraints_come_first() {
        let mut c = ConstraintSet::default();
        c.push("Tablewares should be put in the top drawer.", ConstraintSource::Scenario);
        c.push("tablewares should be put in the top drawer.", ConstraintSource::Scenario);
        assert_eq!(c.all().len(), 3);
        assert_eq!(c.all()[0].source, ConstraintSource::Builtin);
        assert_eq!(c.extra().count(), 1);
    }
}
