use std::fmt::Write;

use super::{LmError, PromptKind, PromptRequest};

const PLAN_ROLE: &str = "Your role is to break down instructions into smaller sub-tasks.";
const PLAN_CONSTRAINTS: [&str; 2] = [
    "The robot should manipulate one object and only move its gripper once in each sub-task.",
    "If the instruction is ambiguous, first refer to the constraints to see whether you can replace the ambiguous reference; if not just leave it as is.",
];
const DEPENDENCE_INTRO: &str = "A human is issuing corrections to a robot, which encounters errors during executing a task. These corrections may depend on the robot's past experiences. Your task is to determine what does a correction depend on: (a) Last interaction. (b) Initial interaction. (c) No dependence.";
const DEPENDENCE_EXAMPLES: [(&str, &str); 3] =
    [("Move right a little bit", "(c)"), ("Keep going", "(a)"), ("Now you can continue", "(b)")];
const DISTILL_INTRO: &str = "Your task is to extract reusable knowledge from the provided interaction history.";
const DISTILL_SECTIONS: [&str; 4] =
    ["Task-related knowledge:", "Variables to save:", "Modified code/plan:", "Updated object state:"];
const SEMANTIC_INTRO: &str = "I'll give you a list of tasks a robot has previously performed and a new task to address. Your goal is to determine the following:\n1. Does the new task fall into the same category with any previous task? (E.g. \"open\" and \"put\" are different categories of tasks)\n2. If so, which specific previous tasks are they? Answer in list format.";

/// Fields that must be present (possibly empty) for each kind.
pub fn required_fields(kind: PromptKind) -> &'static [&'static str] {
    match kind {
        PromptKind::Plan => &["instruction", "object_state"],
        PromptKind::Replan => &["instruction", "object_state", "original_plan", "current_skill", "correction"],
        PromptKind::Compose => &["skill", "api", "parameters"],
        PromptKind::Recompose => &["skill", "api", "program", "failed_statement", "correction", "interpretation"],
        PromptKind::LevelClassify => &["correction", "skill", "plan"],
        PromptKind::DependenceClassify => &["correction"],
        PromptKind::FrameResolve => &["correction", "object", "normal"],
        PromptKind::DistillSkill => &["task_name", "history", "program"],
        PromptKind::DistillPlan => &["task_name", "history", "final_plan"],
        PromptKind::RetrieveSemantic => &["previous_tasks", "new_task"],
    }
}

fn sentence(s: &str) -> String {
    let s = s.trim();
    if s.ends_with(['.', '!', '?']) {
        s.to_string()
    } else {
        format!("{s}.")
    }
}

fn lines(s: &str) -> impl Iterator<Item = &str> {
    s.lines().map(str::trim).filter(|l| !l.is_empty())
}

fn or_none(s: &str) -> &str {
    if s.trim().is_empty() {
        "none"
    } else {
        s.trim()
    }
}

fn plan_head(out: &mut String, req: &PromptRequest) {
    let _ = writeln!(out, "{PLAN_ROLE}");
    let _ = writeln!(out, "Constraints:");
    let mut n = 0;
    for c in PLAN_CONSTRAINTS.iter().copied().chain(lines(req.field("constraints"))) {
        n += 1;
        let _ = writeln!(out, "{n}. {}", sentence(c));
    }
    let _ = writeln!(out, "Answer format: 1: \"<sub-task>\", 2: \"<sub-task>\", ...");
    let state = req.field("object_state").trim();
    let _ = writeln!(out, "Object state: {}", if state.is_empty() { "N/A" } else { state });
    let retrieved = req.field("retrieved").trim();
    if !retrieved.is_empty() {
        let _ = writeln!(out, "Relevant knowledge:\n{retrieved}");
    }
    let _ = writeln!(out, "Instruction: {}", req.field("instruction").trim());
}

fn compose_head(out: &mut String, req: &PromptRequest) {
    let _ = writeln!(out, "Write a skill policy for a robot arm using only these commands, one per line:");
    for l in lines(req.field("api")) {
        let _ = writeln!(out, "  {l}");
    }
    let _ = writeln!(out, "Bind perceived objects with name = detect(\"label\") before using them.");
    let _ = writeln!(out, "Task parameters (use them as primitive arguments):");
    for l in lines(req.field("parameters")) {
        let _ = writeln!(out, "  {l}");
    }
    for (label, name) in [("Object", "object"), ("Destination", "destination")] {
        let v = req.field(name).trim();
        if !v.is_empty() {
            let _ = writeln!(out, "{label}: {v}");
        }
    }
    let _ = writeln!(out, "Skill: {}", req.field("skill").trim());
}

/// Render the prompt text for a request.
pub fn render(req: &PromptRequest) -> Result<String, LmError> {
    if let Some(missing) = required_fields(req.kind).iter().find(|f| !req.fields.contains_key(**f)) {
        return Err(LmError::MissingField { kind: req.kind, field: missing.to_string() });
    }
    let mut out = String::new();
    match req.kind {
        PromptKind::Plan => {
            plan_head(&mut out, req);
            out.push_str("Plan:");
        }
        PromptKind::Replan => {
            plan_head(&mut out, req);
            let _ = writeln!(out, "Original plan: {}", req.field("original_plan").trim());
            let _ = writeln!(out, "Completed sub-tasks: {}", or_none(req.field("completed")));
            let _ = writeln!(out, "Current sub-task: {}", req.field("current_skill").trim());
            let _ = writeln!(out, "Interaction history:\n{}", or_none(req.field("context")));
            let _ = writeln!(out, "Correction: \"{}\"", req.field("correction").trim());
            let _ = writeln!(out, "List only the sub-tasks that remain, with the correction applied.");
            out.push_str("Plan:");
        }
        PromptKind::Compose => {
            compose_head(&mut out, req);
            out.push_str("Program:");
        }
        PromptKind::Recompose => {
            compose_head(&mut out, req);
            let _ = writeln!(out, "Current program:\n{}", req.field("program").trim());
            let _ = writeln!(out, "Failed at statement: {}", req.field("failed_statement").trim());
            let _ = writeln!(out, "Interaction history:\n{}", or_none(req.field("context")));
            let _ = writeln!(out, "Correction: \"{}\"", req.field("correction").trim());
            let _ = writeln!(out, "Interpretation: {}", req.field("interpretation").trim());
            let _ = writeln!(
                out,
                "Rewrite the whole program with the interpretation applied; leave earlier statements unchanged."
            );
            out.push_str("Program:");
        }
        PromptKind::LevelClassify => {
            let _ = writeln!(out, "A human is correcting a robot while it executes a plan.");
            let _ = writeln!(out, "Answer \"high\" if the correction concerns the plan, a constraint or a preference.");
            let _ = writeln!(
                out,
                "Answer \"low\" if it adjusts a primitive parameter such as the gripper pose, or object information."
            );
            let _ = writeln!(out, "Plan: {}", req.field("plan").trim());
            let _ = writeln!(out, "Current sub-task: {}", req.field("skill").trim());
            let _ = writeln!(out, "Correction: \"{}\"", req.field("correction").trim());
            out.push_str("Answer:");
        }
        PromptKind::DependenceClassify => {
            let _ = writeln!(out, "{DEPENDENCE_INTRO}");
            for (c, a) in DEPENDENCE_EXAMPLES {
                let _ = writeln!(out, "\"{c}\": {a}");
            }
            let _ = write!(out, "\"{}\":", req.field("correction").trim());
        }
        PromptKind::FrameResolve => {
            let _ = writeln!(out, "Decide which reference frame a direction in the correction uses: the absolute world frame, or the frame of the object being manipulated.");
            let _ = writeln!(out, "Object: {}", req.field("object").trim());
            let _ = writeln!(out, "Object normal vector: {}", req.field("normal").trim());
            let _ = writeln!(out, "Correction: \"{}\"", req.field("correction").trim());
            let _ = writeln!(out, "Answer with two lines:");
            let _ = writeln!(out, "frame: object-centric | absolute");
            out.push_str("direction: forward | backward | left | right | up | down | none");
        }
        PromptKind::DistillSkill | PromptKind::DistillPlan => {
            let _ = writeln!(out, "{DISTILL_INTRO}");
            let _ = writeln!(out, "Task name: {}", req.field("task_name").trim());
            let _ = writeln!(out, "Interaction history:\n{}", or_none(req.field("history")));
            if req.kind == PromptKind::DistillSkill {
                let _ = writeln!(out, "Final program:\n{}", req.field("program").trim());
                let _ = writeln!(out, "Save variables as name = value separated by \";\". Known names: grasp_offset (3-vector), grasp_orientation (label), pull_distance (meters).");
            } else {
                let _ = writeln!(out, "Final plan: {}", req.field("final_plan").trim());
                let _ = writeln!(
                    out,
                    "List knowledge as lines \"- constraint [robot|task]: text\" or \"- preference [user]: text\"."
                );
            }
            let _ = writeln!(out, "Current object state: {}", or_none(req.field("object_state")));
            let _ = writeln!(out, "Answer with these sections in order:");
            out.push_str(&DISTILL_SECTIONS.join("\n"));
        }
        PromptKind::RetrieveSemantic => {
            let _ = writeln!(out, "{SEMANTIC_INTRO}");
            let previous: Vec<String> = lines(req.field("previous_tasks"))
                .enumerate()
                .map(|(i, t)| format!("{}. {}", i + 1, sentence(t)))
                .collect();
            let _ = writeln!(out, "Previous tasks: {}", previous.join(" "));
            let _ = writeln!(out, "New task: {}", sentence(req.field("new_task")));
            out.push_str("Answer as: 1: \"Yes\" or \"No\", 2: [task numbers]");
        }
    }
    Ok(out)
}
