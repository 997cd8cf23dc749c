use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use super::{KnowledgeEntry, KnowledgeError, KnowledgeKind, ObjectInfo, Provenance, Scope};
use crate::composer::{filter_parameters, ParamValue};
use crate::correction::HistoryEntry;
use crate::dsl::{self, Program};
use crate::lm::{Distilled, Gateway, PromptKind, PromptRequest, Reply, Transcript};
use crate::sim::{detect, skill_success, WorldState};
use crate::skill::parse_skill;

static STATE_ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([^();,\n]+)\(([^)]*)\)").expect("static"));
static KNOWLEDGE_ITEM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^-?\s*(constraint|preference)\s*\[(robot|user|task)\]\s*:\s*(.+)$").expect("static"));

/// `label(state)` items from an "Updated object state" section.
pub fn parse_state_updates(text: &str) -> BTreeMap<String, String> {
    STATE_ITEM
        .captures_iter(text)
        .map(|c| (c[1].trim().to_string(), c[2].trim().to_string()))
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .collect()
}

fn history_text(history: &[&HistoryEntry]) -> String {
    if history.is_empty() {
        "none".to_string()
    } else {
        history.iter().map(|e| e.describe()).collect::<Vec<_>>().join("\n")
    }
}

fn distilled(gw: &Gateway, t: &mut Transcript, req: &PromptRequest) -> Result<Distilled, KnowledgeError> {
    match gw.complete(req, t)? {
        Reply::Distilled(d) => Ok(d),
        other => Err(crate::lm::unexpected(req.kind, &other).into()),
    }
}

pub struct SkillDistillInput<'a> {
    pub skill: &'a str,
    pub history: &'a [&'a HistoryEntry],
    pub program: &'a Program,
    pub world_after: &'a WorldState,
    pub provenance: Provenance,
}

/// One skill-level entry holding the final parameters, the manipulated
/// object's label and feature, and the resulting object states.
pub fn distill_skill(
    gw: &Gateway,
    t: &mut Transcript,
    input: SkillDistillInput<'_>,
) -> Result<Vec<KnowledgeEntry>, KnowledgeError> {
    if !skill_success(input.world_after, input.skill)? {
        return Err(KnowledgeError::NotFulfilled(input.skill.to_string()));
    }
    let req = PromptRequest::new(PromptKind::DistillSkill)
        .with("task_name", input.skill)
        .with("history", history_text(input.history))
        .with("program", dsl::format(input.program));
    let d = distilled(gw, t, &req)?;
    let params =
        crate::lm::parameter_lines(&d.variables).into_iter().map(|(k, v, _)| (k, ParamValue::parse(&v))).collect();
    let mut entry = KnowledgeEntry::new(input.skill, KnowledgeKind::SkillLevel);
    entry.task_params = filter_parameters(params);
    entry.object_state_updates = parse_state_updates(&d.object_state);
    entry.object_info = parse_skill(input.skill)
        .and_then(|i| detect(input.world_after, &i.object).ok())
        .and_then(|id| input.world_after.objects.get(&id))
        .map(|o| ObjectInfo { label: o.label.clone(), feature: o.feature.clone() });
    entry.provenance = input.provenance;
    Ok(vec![entry])
}

pub struct PlanDistillInput<'a> {
    pub instruction: &'a str,
    pub history: &'a [&'a HistoryEntry],
    /// Texts of the plan-level corrections of the episode.
    pub corrections: &'a [String],
    pub final_plan: &'a [String],
    pub object_state: &'a str,
    pub fulfilled: bool,
    pub provenance: Provenance,
}

/// A task entry with task constraints and state updates, plus one global entry
/// per robot constraint or user preference.
pub fn distill_plan(
    gw: &Gateway,
    t: &mut Transcript,
    input: PlanDistillInput<'_>,
) -> Result<Vec<KnowledgeEntry>, KnowledgeError> {
    if !input.fulfilled {
        return Err(KnowledgeError::NotFulfilled(input.instruction.to_string()));
    }
    let numbered =
        input.final_plan.iter().enumerate().map(|(i, s)| format!("{}: \"{s}\"", i + 1)).collect::<Vec<_>>().join("\n");
    let req = PromptRequest::new(PromptKind::DistillPlan)
        .with("task_name", input.instruction)
        .with("history", history_text(input.history))
        .with("final_plan", numbered)
        .with("corrections", input.corrections.join("\n"))
        .with("object_state", input.object_state);
    let d = distilled(gw, t, &req)?;
    let mut task = KnowledgeEntry::new(input.instruction, KnowledgeKind::PlanLevel);
    task.provenance = input.provenance.clone();
    task.object_state_updates = parse_state_updates(&d.object_state);
    let mut globals = Vec::new();
    for line in d.knowledge.lines().map(str::trim).filter(|l| !l.is_empty() && *l != "none") {
        let Some(c) = KNOWLEDGE_ITEM.captures(line) else {
            task.constraints.push(line.trim_start_matches('-').trim().to_string());
            continue;
        };
        let text = c[3].trim().to_string();
        match (&c[1], &c[2]) {
            (_, "task") => task.constraints.push(text),
            (kind, _) => {
                let mut g = KnowledgeEntry::new(&text, KnowledgeKind::PlanLevel);
                g.scope = Scope::Global;
                if kind == "preference" {
                    g.preferences.push(text);
                } else {
                    g.constraints.push(text);
                }
                g.provenance = input.provenance.clone();
                globals.push(g);
            }
        }
    }
    let mut out = vec![task];
    out.extend(globals);
    Ok(out)
}
