//! Skill composition: skill description plus retrieved parameters to a
//! validated policy program.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{self, Builtin, DslError, Program};
use crate::lm::{Gateway, LmError, PromptKind, PromptRequest, Reply, Transcript};
use crate::sim::{detect, Approach, SimError, WorldState};
use crate::skill::{parse_skill, SkillCategory};

/// Share of the full travel pulled when opening without learned knowledge.
pub const DEFAULT_PULL_FRACTION: f64 = 0.7;
/// Names accepted as task parameters.
pub const PARAMETERS: [&str; 3] = ["grasp_offset", "grasp_orientation", "pull_distance"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector([f64; 3]),
    Label(String),
}

impl ParamValue {
    pub fn parse(text: &str) -> ParamValue {
        let t = text.trim();
        if let Some(v) = crate::lm::parse_vector_text(t) {
            ParamValue::Vector(v)
        } else if let Ok(x) = t.parse::<f64>() {
            ParamValue::Scalar(x)
        } else {
            ParamValue::Label(t.trim_matches('"').to_string())
        }
    }

    pub fn render(&self) -> String {
        match self {
            ParamValue::Scalar(x) => x.to_string(),
            ParamValue::Vector([a, b, c]) => format!("[{a}, {b}, {c}]"),
            ParamValue::Label(s) => s.clone(),
        }
    }
}

/// Parameters and object information handed to the composer.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SkillKnowledgeBundle {
    pub params: BTreeMap<String, ParamValue>,
    pub object_label: Option<String>,
    pub source: Option<String>,
}

impl SkillKnowledgeBundle {
    pub fn grasp_offset(&self) -> Option<[f64; 3]> {
        match self.params.get("grasp_offset") {
            Some(ParamValue::Vector(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn grasp_orientation(&self) -> Option<Approach> {
        match self.params.get("grasp_orientation") {
            Some(ParamValue::Label(l)) => l.parse().ok(),
            _ => None,
        }
    }

    pub fn pull_distance(&self) -> Option<f64> {
        match self.params.get("pull_distance") {
            Some(ParamValue::Scalar(x)) => Some(*x),
            _ => None,
        }
    }
}

/// Keep registered parameters, dropping and logging anything else.
pub fn filter_parameters(params: BTreeMap<String, ParamValue>) -> BTreeMap<String, ParamValue> {
    params
        .into_iter()
        .filter(|(k, _)| {
            let known = PARAMETERS.contains(&k.as_str());
            if !known {
                tracing::warn!(parameter = %k, "ignoring unknown task parameter");
            }
            known
        })
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComposeError {
    #[error("no skill template for {0:?}")]
    UnknownSkillCategory(String),
    #[error("composed program is invalid: {0}")]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn api_reference() -> String {
    Builtin::ALL.iter().map(|b| b.signature()).collect::<Vec<_>>().join("\n")
}

fn program_of(reply: Reply, kind: PromptKind, skill: &str) -> Result<Program, ComposeError> {
    let Reply::Program(text) = reply else {
        return Err(ComposeError::Lm(crate::lm::unexpected(kind, &reply)));
    };
    let program = dsl::parse(&text)?;
    if program.is_empty() {
        return Err(ComposeError::UnknownSkillCategory(skill.to_string()));
    }
    Ok(program)
}

/// Resolved parameter lines: bundle values first, scene defaults otherwise.
fn parameter_lines(skill: &str, bundle: &SkillKnowledgeBundle, world: &WorldState) -> Vec<String> {
    let intent = parse_skill(skill);
    let target = intent.as_ref().and_then(|i| detect(world, &i.object).ok()).and_then(|id| world.objects.get(&id));
    let mut lines = Vec::new();
    let offset = bundle.grasp_offset().unwrap_or([0.0; 3]);
    lines.push(format!("grasp_offset = {}", ParamValue::Vector(offset).render()));
    if let Some(o) = bundle.grasp_orientation().or(target.map(|t| t.grasp_orientation)) {
        lines.push(format!("grasp_orientation = {o}"));
    }
    let articulation = target.and_then(|t| t.articulation.as_ref());
    match intent.map(|i| i.category) {
        Some(SkillCategory::Open) => {
            if let Some(d) = bundle.pull_distance().or(articulation.map(|a| DEFAULT_PULL_FRACTION * a.travel_max)) {
                lines.push(format!("pull_distance = {}", crate::canonical::quantize(d)));
            }
        }
        Some(SkillCategory::Close) => {
            if let Some(a) = articulation {
                lines.push(format!("pull_distance = {}", a.travel_max));
                let d = -a.axis;
                lines.push(format!(
                    "pull_direction = {}",
                    ParamValue::Vector([d.x, d.y, d.z].map(|x| x + 0.0)).render()
                ));
            }
        }
        _ => {}
    }
    lines
}

pub fn compose(
    gateway: &Gateway,
    transcript: &mut Transcript,
    skill: &str,
    bundle: &SkillKnowledgeBundle,
    world: &WorldState,
) -> Result<Program, ComposeError> {
    let intent = parse_skill(skill);
    let req = PromptRequest::new(PromptKind::Compose)
        .with("skill", skill)
        .with("api", api_reference())
        .with("parameters", parameter_lines(skill, bundle, world).join("\n"))
        .with("object", intent.as_ref().map(|i| i.object.clone()).unwrap_or_default())
        .with("destination", intent.and_then(|i| i.destination).unwrap_or_default());
    program_of(gateway.complete(&req, transcript)?, PromptKind::Compose, skill)
}

/// Inputs for rewriting a program after a low-level correction.
pub struct RecomposeInput<'a> {
    pub skill: &'a str,
    pub program: &'a Program,
    pub failed_statement: usize,
    pub correction: &'a str,
    pub context: &'a str,
    pub interpretation: &'a str,
}

/// Rewrite a program and choose where to resume: the first changed statement,
/// but never later than the statement that failed.
pub fn recompose(
    gateway: &Gateway,
    transcript: &mut Transcript,
    input: RecomposeInput<'_>,
) -> Result<(Program, usize), ComposeError> {
    let req = PromptRequest::new(PromptKind::Recompose)
        .with("skill", input.skill)
        .with("api", api_reference())
        .with("parameters", "")
        .with("program", dsl::format(input.program))
        .with("failed_statement", input.failed_statement.to_string())
        .with("correction", input.correction)
        .with("context", input.context)
        .with("interpretation", input.interpretation);
    let program = program_of(gateway.complete(&req, transcript)?, PromptKind::Recompose, input.skill)?;
    let first_change = program
        .statements
        .iter()
        .zip(&input.program.statements)
        .position(|(a, b)| a != b)
        .unwrap_or(program.len().min(input.program.len()));
    let resume = first_change.min(input.failed_statement).min(program.len());
    Ok((program, resume))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Value;
    use crate::lm::BackendRules;
    use crate::sim::fixtures::desk;

    fn gw() -> Gateway {
        Gateway::scripted(BackendRules::default())
    }

    #[test]
    fn open_with_bundle() {
        let mut bundle = SkillKnowledgeBundle::default();
        bundle.params.insert("grasp_offset".into(), ParamValue::Vector([0.0, 0.0, 0.02]));
        bundle.params.insert("pull_distance".into(), ParamValue::Scalar(0.15));
        let p = compose(&gw(), &mut Transcript::default(), "Open the top drawer", &bundle, &desk()).unwrap();
        assert_eq!(
            dsl::format(&p),
            "handle = detect(\"top drawer\")\ngrasp(handle, offset=[0, 0, 0.02], orientation=\"front\")\npull(handle, 0.15)\nopen_gripper()"
        );
    }

    #[test]
    fn defaults_without_knowledge() {
        let p =
            compose(&gw(), &mut Transcript::default(), "Open the top drawer", &Default::default(), &desk()).unwrap();
        assert_eq!(p.statements[1].arg("offset"), Some(&Value::Vector([0.0, 0.0, 0.0])));
        // 0.7 of the fixture drawer's 0.3 m travel
        assert_eq!(p.statements[2].arg("distance"), Some(&Value::Number(0.21)));
        let pick =
            compose(&gw(), &mut Transcript::default(), "Pick up the scissors", &Default::default(), &desk()).unwrap();
        assert_eq!(pick.statements[1].command, Builtin::Grasp);
        assert_eq!(pick.statements[1].arg("offset"), Some(&Value::Vector([0.0, 0.0, 0.0])));
    }

    #[test]
    fn close_pushes_back_along_the_axis() {
        let p =
            compose(&gw(), &mut Transcript::default(), "Close the top drawer", &Default::default(), &desk()).unwrap();
        assert_eq!(p.statements[2].arg("direction"), Some(&Value::Vector([0.0, 1.0, 0.0])));
        assert_eq!(p.statements[2].arg("distance"), Some(&Value::Number(0.3)));
    }

    #[test]
    fn unknown_category() {
        let e = compose(&gw(), &mut Transcript::default(), "Slice the carrot", &Default::default(), &desk());
        assert_eq!(e, Err(ComposeError::UnknownSkillCategory("Slice the carrot".into())));
    }

    #[test]
    fn recompose_resumes_at_grasp_and_accumulates() {
        let mut t = Transcript::default();
        let p = compose(&gw(), &mut t, "Open the top drawer", &Default::default(), &desk()).unwrap();
        let step = |p: &Program, interp: &str| {
            recompose(
                &gw(),
                &mut Transcript::default(),
                RecomposeInput {
                    skill: "Open the top drawer",
                    program: p,
                    failed_statement: 1,
                    correction: "move right a little bit",
                    context: "",
                    interpretation: interp,
                },
            )
            .unwrap()
        };
        let (a, resume) = step(&p, "grasp_offset += [0.05, 0, 0]");
        assert_eq!(resume, 1);
        let (b, _) = step(&a, "grasp_offset += [0.025, 0, 0]");
        let (direct, _) = step(&p, "grasp_offset += [0.075, 0, 0]");
        assert_eq!(b, direct);
        let (same, resume) = step(&p, "grasp_offset += [0, 0, 0]");
        assert_eq!(same, p);
        assert_eq!(resume, 1);
    }

    #[test]
    fn unknown_parameters_are_dropped() {
        let mut m = BTreeMap::new();
        m.insert("grasp_offset".to_string(), ParamValue::Vector([0.0; 3]));
        m.insert("wrist_twist".to_string(), ParamValue::Scalar(1.0));
        assert_eq!(filter_parameters(m).len(), 1);
    }

    #[test]
    fn param_values_parse() {
        assert_eq!(ParamValue::parse("[0.1, 0, 0]"), ParamValue::Vector([0.1, 0.0, 0.0]));
        assert_eq!(ParamValue::parse("0.15"), ParamValue::Scalar(0.15));
        assert_eq!(ParamValue::parse("front"), ParamValue::Label("front".into()));
    }
}
