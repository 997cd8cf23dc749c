//! Deterministic rule-table backend. Every reply is a pure function of the
//! request fields and the scenario's rules.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Backend, Completion, Level, LmError, PromptKind, PromptRequest};
use crate::dsl::{self, Builtin, Program, Value};
use crate::sim::label_tokens;
use crate::skill::{normalize, parse_skill, SkillCategory};

/// Instruction pattern with `{name}` placeholders and the plan it produces.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanRule {
    pub instruction: String,
    pub skills: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<PlanVariant>,
}

/// Alternative plan used when its phrases occur in the prompt context
/// (constraints, retrieved knowledge, object state, correction).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanVariant {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub when_all: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub when_any: Vec<String>,
    pub skills: Vec<String>,
}

impl PlanVariant {
    fn applies(&self, context: &str) -> bool {
        let has = |p: &String| context.contains(&normalize(p));
        self.when_all.iter().all(has) && (self.when_any.is_empty() || self.when_any.iter().any(has))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BackendRules {
    #[serde(default)]
    pub plans: Vec<PlanRule>,
    /// Normalized correction text to forced level.
    #[serde(default)]
    pub level_overrides: BTreeMap<String, Level>,
    /// Name token to feature prototype, the stand-in for a text-image model.
    #[serde(default)]
    pub cross_modal: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, Default)]
pub struct ScriptedBackend {
    rules: BackendRules,
}

const DIRECTION_WORDS: &[&str] = &[
    "left",
    "right",
    "forward",
    "forwards",
    "backward",
    "backwards",
    "back",
    "up",
    "down",
    "higher",
    "lower",
    "closer",
    "toward",
    "towards",
    "away",
];
const MAGNITUDE_WORDS: &[&str] = &["cm", "mm", "meter", "meters", "bit", "little", "tiny", "slightly", "more"];
const CATEGORIES: &[(&str, &[&str])] = &[
    ("open", &["open"]),
    ("close", &["close", "shut"]),
    ("pick", &["pick", "grab", "take", "lift"]),
    ("put", &["put", "place", "sort", "store", "hang", "move", "tidy", "clean", "arrange"]),
    ("bring", &["bring", "fetch", "deliver", "serve"]),
    ("make", &["make", "prepare", "cook", "heat", "slice", "cut"]),
];

/// Task category used by the semantic retrieval rule: the first verb that
/// belongs to a known category.
pub fn semantic_category(task: &str) -> Option<&'static str> {
    label_tokens(task)
        .iter()
        .find_map(|t| CATEGORIES.iter().find(|(_, verbs)| verbs.contains(&t.as_str())).map(|(c, _)| *c))
}

fn words(text: &str) -> Vec<String> {
    normalize(text)
        .replace("pick up", "pick")
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn has_phrase(text: &str, phrases: &[&str]) -> bool {
    let t = format!(" {} ", words(text).join(" "));
    phrases.iter().any(|p| t.contains(&format!(" {p} ")))
}

fn classify_level(correction: &str) -> Level {
    let w = words(correction);
    let low = w.iter().any(|x| DIRECTION_WORDS.contains(&x.as_str()) || MAGNITUDE_WORDS.contains(&x.as_str()))
        || w.iter().any(|x| x.chars().next().is_some_and(|c| c.is_ascii_digit()))
        || has_phrase(correction, &["keep going", "from the", "continue", "resume", "again", "further"]);
    if low {
        Level::Low
    } else {
        Level::High
    }
}

fn classify_dependence(correction: &str) -> &'static str {
    if has_phrase(correction, &["more", "keep going", "keep", "again", "further"]) {
        "(a)"
    } else if has_phrase(correction, &["continue", "resume", "now you can", "as before", "original"]) {
        "(b)"
    } else {
        "(c)"
    }
}

fn resolve_direction(correction: &str) -> &'static str {
    let table: &[(&str, &[&str])] = &[
        ("forward", &["forward", "forwards", "toward", "towards", "closer"]),
        ("backward", &["backward", "backwards", "back", "away"]),
        ("left", &["left"]),
        ("right", &["right"]),
        ("up", &["up", "higher", "raise"]),
        ("down", &["down", "lower"]),
    ];
    if has_phrase(correction, &["from the"]) {
        return "none";
    }
    for w in words(correction) {
        if let Some((d, _)) = table.iter().find(|(_, ws)| ws.contains(&w.as_str())) {
            return d;
        }
    }
    "none"
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().collect::<String>() + c.as_str()).unwrap_or_default()
}

fn render_plan(skills: &[String]) -> String {
    skills.iter().enumerate().map(|(i, s)| format!("{}: \"{s}\"", i + 1)).collect::<Vec<_>>().join(",\n")
}

/// Match a `{name}` pattern against a normalized instruction.
fn match_pattern(pattern: &str, instruction: &str) -> Option<BTreeMap<String, String>> {
    let pattern = normalize(pattern);
    let placeholder = Regex::new(r"\{([a-z_][a-z0-9_]*)\}").expect("static");
    let mut re = String::from("^");
    let mut last = 0;
    let mut names = Vec::new();
    for c in placeholder.captures_iter(&pattern) {
        let m = c.get(0).expect("match");
        re.push_str(&regex::escape(&pattern[last..m.start()]));
        re.push_str(&format!("(?P<{}>.+?)", &c[1]));
        names.push(c[1].to_string());
        last = m.end();
    }
    re.push_str(&regex::escape(&pattern[last..]));
    re.push('$');
    let caps = Regex::new(&re).ok()?.captures(instruction)?;
    Some(names.into_iter().map(|n| (n.clone(), caps[n.as_str()].to_string())).collect())
}

fn substitute(template: &str, bindings: &BTreeMap<String, String>) -> String {
    bindings.iter().fold(template.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
}

/// `name = value` lines or `;`-separated pairs.
pub(crate) fn parameter_lines(text: &str) -> Vec<(String, String, bool)> {
    text.split(['\n', ';'])
        .filter_map(|l| {
            let l = l.trim();
            if let Some((k, v)) = l.split_once("+=") {
                return Some((k.trim().to_string(), v.trim().to_string(), true));
            }
            let (k, v) = l.split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string(), false))
        })
        .collect()
}

pub fn parse_vector_text(s: &str) -> Option<[f64; 3]> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    let v: Vec<f64> = inner.split(',').map(|x| x.trim().parse().ok()).collect::<Option<_>>()?;
    <[f64; 3]>::try_from(v).ok()
}

fn str_value(s: &str) -> Value {
    Value::Str(s.trim().trim_matches('"').to_string())
}

impl ScriptedBackend {
    pub fn new(rules: BackendRules) -> Self {
        ScriptedBackend { rules }
    }

    pub fn rules(&self) -> &BackendRules {
        &self.rules
    }

    fn plan_for(&self, instruction: &str, context: &str) -> Option<Vec<String>> {
        let instruction = normalize(instruction);
        let context = normalize(context);
        for rule in &self.rules.plans {
            if let Some(bindings) = match_pattern(&rule.instruction, &instruction) {
                let skills = rule.variants.iter().find(|v| v.applies(&context)).map_or(&rule.skills, |v| &v.skills);
                return Some(skills.iter().map(|s| substitute(s, &bindings)).collect());
            }
        }
        parse_skill(&instruction).map(|_| vec![capitalize(&instruction)])
    }

    fn plan_context(req: &PromptRequest) -> String {
        ["constraints", "retrieved", "object_state", "context", "correction"]
            .iter()
            .map(|f| req.field(f))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn plan(&self, req: &PromptRequest) -> String {
        match self.plan_for(req.field("instruction"), &Self::plan_context(req)) {
            Some(skills) => render_plan(&skills),
            None => format!("I do not know how to do \"{}\".", req.field("instruction")),
        }
    }

    fn replan(&self, req: &PromptRequest) -> String {
        let Some(full) = self.plan_for(req.field("instruction"), &Self::plan_context(req)) else {
            return format!("I do not know how to do \"{}\".", req.field("instruction"));
        };
        let completed: Vec<String> = req.field("completed").lines().map(normalize).filter(|l| !l.is_empty()).collect();
        let normalized: Vec<String> = full.iter().map(|s| normalize(s)).collect();
        let rest: Vec<String> = if normalized.starts_with(&completed) {
            full[completed.len()..].to_vec()
        } else {
            full.into_iter().zip(normalized).filter(|(_, n)| !completed.contains(n)).map(|(s, _)| s).collect()
        };
        if rest.is_empty() {
            render_plan(&[req.field("current_skill").to_string()])
        } else {
            render_plan(&rest)
        }
    }

    fn compose(&self, req: &PromptRequest) -> String {
        let skill = req.field("skill");
        let Some(intent) = parse_skill(skill) else {
            return format!("# unknown skill category: {skill}");
        };
        let params: BTreeMap<String, String> =
            parameter_lines(req.field("parameters")).into_iter().map(|(k, v, _)| (k, v)).collect();
        let object = match req.field("object").trim() {
            "" => intent.object.clone(),
            o => o.to_string(),
        };
        let ident = |s: &str| Value::Ident(s.to_string());
        let detect = |name: &str, label: &str| {
            dsl::Statement::new(Some(name), Builtin::Detect, vec![dsl::Arg::positional(Value::Str(label.to_string()))])
        };
        let handle =
            if matches!(intent.category, SkillCategory::Open | SkillCategory::Close) { "handle" } else { "obj" };
        let mut grasp_args = vec![dsl::Arg::positional(ident(handle))];
        if let Some(v) = params.get("grasp_offset").and_then(|v| parse_vector_text(v)) {
            grasp_args.push(dsl::Arg::named("offset", Value::Vector(v)));
        }
        if let Some(o) = params.get("grasp_orientation") {
            grasp_args.push(dsl::Arg::named("orientation", str_value(o)));
        }
        let grasp = dsl::Statement::new(None, Builtin::Grasp, grasp_args);
        let open = dsl::Statement::new(None, Builtin::OpenGripper, vec![]);
        let statements = match intent.category {
            SkillCategory::Open | SkillCategory::Close => {
                let Some(distance) = params.get("pull_distance").and_then(|d| d.parse::<f64>().ok()) else {
                    return format!("# missing pull_distance for: {skill}");
                };
                let mut pull_args =
                    vec![dsl::Arg::positional(ident(handle)), dsl::Arg::positional(Value::Number(distance))];
                if let Some(d) = params.get("pull_direction").and_then(|d| parse_vector_text(d)) {
                    pull_args.push(dsl::Arg::named("direction", Value::Vector(d)));
                }
                vec![detect(handle, &object), grasp, dsl::Statement::new(None, Builtin::Pull, pull_args), open]
            }
            SkillCategory::PickUp => vec![
                detect(handle, &object),
                grasp,
                dsl::Statement::new(None, Builtin::MoveBy, vec![dsl::Arg::positional(Value::Vector([0.0, 0.0, 0.1]))]),
            ],
            SkillCategory::Put | SkillCategory::Hang => {
                let dest = match req.field("destination").trim() {
                    "" => intent.destination.clone().unwrap_or_default(),
                    d => d.to_string(),
                };
                vec![
                    detect("obj", &object),
                    detect("dest", &dest),
                    dsl::Statement::new(
                        None,
                        Builtin::Place,
                        vec![dsl::Arg::positional(ident("obj")), dsl::Arg::positional(ident("dest"))],
                    ),
                    open,
                ]
            }
        };
        dsl::format(&Program { statements })
    }

    fn recompose(&self, req: &PromptRequest) -> String {
        let source = req.field("program");
        let Ok(mut program) = dsl::parse(source) else {
            return source.to_string();
        };
        let failed: usize = req.field("failed_statement").trim().parse().unwrap_or(usize::MAX);
        let last_of = |program: &Program, cmd: Builtin| {
            let upto = failed.min(program.len().saturating_sub(1));
            (0..=upto)
                .rev()
                .find(|&i| program.statements.get(i).is_some_and(|s| s.command == cmd))
                .or_else(|| program.statements.iter().position(|s| s.command == cmd))
        };
        for (name, value, add) in parameter_lines(req.field("interpretation")) {
            match name.as_str() {
                "grasp_offset" => {
                    let (Some(i), Some(v)) = (last_of(&program, Builtin::Grasp), parse_vector_text(&value)) else {
                        continue;
                    };
                    let stmt = &mut program.statements[i];
                    let base = match (add, stmt.arg("offset")) {
                        (true, Some(Value::Vector(b))) => *b,
                        _ => [0.0; 3],
                    };
                    let next = [base[0] + v[0], base[1] + v[1], base[2] + v[2]].map(crate::canonical::snap);
                    stmt.set_arg("offset", Value::Vector(next));
                }
                "grasp_orientation" => {
                    let Some(i) = last_of(&program, Builtin::Grasp) else { continue };
                    program.statements[i].set_arg("orientation", str_value(&value));
                }
                "pull_distance" => {
                    let (Some(i), Ok(d)) = (last_of(&program, Builtin::Pull), value.parse::<f64>()) else { continue };
                    let stmt = &mut program.statements[i];
                    let base = match (add, stmt.arg("distance")) {
                        (true, Some(Value::Number(b))) => *b,
                        _ => 0.0,
                    };
                    stmt.set_arg("distance", Value::Number(crate::canonical::snap(base + d)));
                }
                _ => {}
            }
        }
        dsl::format(&program)
    }

    fn distill_skill(&self, req: &PromptRequest) -> String {
        let task = req.field("task_name");
        let program = dsl::parse(req.field("program")).unwrap_or_default();
        let mut vars = Vec::new();
        if let Some(g) = program.statements.iter().rev().find(|s| s.command == Builtin::Grasp) {
            let offset = match g.arg("offset") {
                Some(v @ Value::Vector(_)) => dsl_value(v),
                _ => "[0, 0, 0]".to_string(),
            };
            vars.push(format!("grasp_offset = {offset}"));
            if let Some(Value::Str(o)) = g.arg("orientation") {
                vars.push(format!("grasp_orientation = {o}"));
            }
        }
        if let Some(Value::Number(d)) =
            program.statements.iter().rev().find(|s| s.command == Builtin::Pull).and_then(|p| p.arg("distance"))
        {
            vars.push(format!("pull_distance = {d}"));
        }
        let state = match parse_skill(task) {
            Some(i) => match i.category {
                SkillCategory::Open => format!("{}(open)", i.object),
                SkillCategory::Close => format!("{}(closed)", i.object),
                SkillCategory::PickUp => format!("{}(in gripper)", i.object),
                SkillCategory::Put => format!("{}(in {})", i.object, i.destination.unwrap_or_default()),
                SkillCategory::Hang => format!("{}(on {})", i.object, i.destination.unwrap_or_default()),
            },
            None => "unchanged".to_string(),
        };
        format!(
            "Task-related knowledge: parameters that fulfilled \"{task}\"\nVariables to save: {}\nModified code/plan:\n{}\nUpdated object state: {state}",
            if vars.is_empty() { "none".to_string() } else { vars.join("; ") },
            dsl::format(&program),
        )
    }

    fn distill_plan(&self, req: &PromptRequest) -> String {
        let knowledge: Vec<String> = req
            .field("corrections")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|c| {
                let w = words(c);
                let has = |x: &str| w.iter().any(|t| t == x);
                if has("robot") {
                    format!("- constraint [robot]: {c}")
                } else if has("user") || has("prefer") || has("prefers") {
                    format!("- preference [user]: {c}")
                } else {
                    format!("- constraint [task]: {c}")
                }
            })
            .collect();
        let state = match req.field("object_state").trim() {
            "" => "unchanged",
            s => s,
        };
        format!(
            "Task-related knowledge:\n{}\nVariables to save: none\nModified code/plan: {}\nUpdated object state: {state}",
            if knowledge.is_empty() { "none".to_string() } else { knowledge.join("\n") },
            req.field("final_plan").trim(),
        )
    }

    fn semantic(&self, req: &PromptRequest) -> String {
        let Some(category) = semantic_category(req.field("new_task")) else {
            return "1: \"No\", 2: []".to_string();
        };
        let hits: Vec<String> = req
            .field("previous_tasks")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .filter(|(_, t)| semantic_category(t) == Some(category))
            .map(|(i, _)| (i + 1).to_string())
            .collect();
        if hits.is_empty() {
            "1: \"No\", 2: []".to_string()
        } else {
            format!("1: \"Yes\", 2: [{}]", hits.join(", "))
        }
    }
}

fn dsl_value(v: &Value) -> String {
    match v {
        Value::Vector([a, b, c]) => format!("[{a}, {b}, {c}]"),
        Value::Number(x) => x.to_string(),
        Value::Str(s) | Value::Ident(s) => s.clone(),
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn complete(&self, req: &PromptRequest, _prompt: &str) -> Result<Completion, LmError> {
        let text = match req.kind {
            PromptKind::Plan => self.plan(req),
            PromptKind::Replan => self.replan(req),
            PromptKind::Compose => self.compose(req),
            PromptKind::Recompose => self.recompose(req),
            PromptKind::LevelClassify => {
                let key = normalize(req.field("correction"));
                let level = self.rules.level_overrides.get(&key).copied().unwrap_or_else(|| classify_level(&key));
                match level {
                    Level::High => "high".to_string(),
                    Level::Low => "low".to_string(),
                }
            }
            PromptKind::DependenceClassify => classify_dependence(req.field("correction")).to_string(),
            PromptKind::FrameResolve => {
                let c = req.field("correction");
                let frame = if has_phrase(c, &["world frame", "absolute"]) { "absolute" } else { "object-centric" };
                format!("frame: {frame}\ndirection: {}", resolve_direction(c))
            }
            PromptKind::DistillSkill => self.distill_skill(req),
            PromptKind::DistillPlan => self.distill_plan(req),
            PromptKind::RetrieveSemantic => self.semantic(req),
        };
        Ok(Completion::text(text))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_reply, Reply};
    use super::*;
    use crate::correction::Dependence;

    fn ask(backend: &ScriptedBackend, req: PromptRequest) -> Reply {
        let text = backend.complete(&req, "").unwrap().text;
        parse_reply(req.kind, &text).unwrap()
    }

    fn spoon_rules() -> BackendRules {
        BackendRules {
            plans: vec![PlanRule {
                instruction: "put the {obj} into the drawer".into(),
                skills: vec!["Pick up the {obj}".into(), "Put down the {obj} into the drawer".into()],
                variants: vec![PlanVariant {
                    when_all: vec!["tablewares should be put in the top drawer".into()],
                    when_any: vec![],
                    skills: vec![
                        "Open the top drawer".into(),
                        "Pick up the {obj}".into(),
                        "Put down the {obj} into the top drawer".into(),
                        "Close the top drawer".into(),
                    ],
                }],
            }],
            ..Default::default()
        }
    }

    #[test]
    fn plan_rule_with_variant() {
        let b = ScriptedBackend::new(spoon_rules());
        let base = PromptRequest::new(PromptKind::Plan)
            .with("instruction", "put the spoon into the drawer")
            .with("object_state", "");
        assert_eq!(
            ask(&b, base.clone()),
            Reply::Plan(vec!["Pick up the spoon".into(), "Put down the spoon into the drawer".into()])
        );
        let with = base.with("constraints", "Tablewares should be put in the top drawer.");
        let Reply::Plan(skills) = ask(&b, with) else { panic!() };
        assert_eq!(skills.len(), 4);
        assert_eq!(skills[2], "Put down the spoon into the top drawer");
    }

    #[test]
    fn atomic_instruction_and_unknown_instruction() {
        let b = ScriptedBackend::default();
        let req =
            PromptRequest::new(PromptKind::Plan).with("instruction", "open the top drawer").with("object_state", "");
        assert_eq!(ask(&b, req), Reply::Plan(vec!["Open the top drawer".into()]));
        let req = PromptRequest::new(PromptKind::Plan).with("instruction", "juggle").with("object_state", "");
        let text = b.complete(&req, "").unwrap().text;
        assert!(matches!(parse_reply(PromptKind::Plan, &text), Err(LmError::ModelFormat { .. })));
    }

    #[test]
    fn replan_keeps_completed_prefix_out() {
        let b = ScriptedBackend::new(spoon_rules());
        let req = PromptRequest::new(PromptKind::Replan)
            .with("instruction", "put the spoon into the drawer")
            .with("object_state", "")
            .with("original_plan", "")
            .with("current_skill", "Pick up the spoon")
            .with("completed", "Open the top drawer")
            .with("correction", "Tablewares should be put in the top drawer");
        let Reply::Plan(skills) = ask(&b, req) else { panic!() };
        assert_eq!(skills[0], "Pick up the spoon");
        assert_eq!(skills.len(), 3);
    }

    #[test]
    fn classifications() {
        let b = ScriptedBackend::default();
        let level = |c: &str| {
            ask(
                &b,
                PromptRequest::new(PromptKind::LevelClassify).with("correction", c).with("skill", "").with("plan", ""),
            )
        };
        assert_eq!(level("You should open the drawer first"), Reply::Level(Level::High));
        assert_eq!(level("Move a little bit to the right"), Reply::Level(Level::Low));
        assert_eq!(level("Tablewares should be put in the top drawer"), Reply::Level(Level::High));
        assert_eq!(level("a bit more"), Reply::Level(Level::Low));
        assert_eq!(level("You should pick up the cup first"), Reply::Level(Level::High));
        let dep = |c: &str| ask(&b, PromptRequest::new(PromptKind::DependenceClassify).with("correction", c));
        assert_eq!(dep("Move right a little bit"), Reply::Dependence(Dependence::None));
        assert_eq!(dep("Keep going"), Reply::Dependence(Dependence::Last));
        assert_eq!(dep("Now you can continue"), Reply::Dependence(Dependence::Initial));
    }

    #[test]
    fn level_override_wins() {
        let mut rules = BackendRules::default();
        rules.level_overrides.insert("put it back".into(), Level::High);
        let b = ScriptedBackend::new(rules);
        let req = PromptRequest::new(PromptKind::LevelClassify)
            .with("correction", "Put it back")
            .with("skill", "")
            .with("plan", "");
        assert_eq!(ask(&b, req), Reply::Level(Level::High));
    }

    #[test]
    fn semantic_categories() {
        let b = ScriptedBackend::default();
        let req = PromptRequest::new(PromptKind::RetrieveSemantic)
            .with(
                "previous_tasks",
                "Open the top drawer\nPick up the scissors\nPut the mug on the shelf\nPick up the yellow marker",
            )
            .with("new_task", "Pick up the spoon");
        assert_eq!(ask(&b, req), Reply::Semantic { same_category: true, tasks: vec![2, 4] });
    }

    #[test]
    fn compose_and_recompose() {
        let b = ScriptedBackend::default();
        let req = PromptRequest::new(PromptKind::Compose)
            .with("skill", "Open the top drawer")
            .with("api", "")
            .with("object", "top drawer handle")
            .with("parameters", "grasp_offset = [0, 0, 0.02]\ngrasp_orientation = front\npull_distance = 0.15");
        let Reply::Program(text) = ask(&b, req) else { panic!() };
        assert_eq!(
            text,
            "handle = detect(\"top drawer handle\")\ngrasp(handle, offset=[0, 0, 0.02], orientation=\"front\")\npull(handle, 0.15)\nopen_gripper()"
        );
        let req = PromptRequest::new(PromptKind::Recompose)
            .with("skill", "Open the top drawer")
            .with("api", "")
            .with("program", text.as_str())
            .with("failed_statement", "1")
            .with("correction", "move right a little bit")
            .with("interpretation", "grasp_offset += [0.025, 0, 0]");
        let Reply::Program(next) = ask(&b, req) else { panic!() };
        assert!(next.contains("offset=[0.025, 0, 0.02]"));
    }

    #[test]
    fn frame_resolution_rule() {
        let b = ScriptedBackend::default();
        let req = |c: &str| {
            PromptRequest::new(PromptKind::FrameResolve)
                .with("correction", c)
                .with("object", "drawer")
                .with("normal", "")
        };
        assert_eq!(
            b.complete(&req("move forward a bit"), "").unwrap().text,
            "frame: object-centric\ndirection: forward"
        );
        assert_eq!(b.complete(&req("a bit more"), "").unwrap().text, "frame: object-centric\ndirection: none");
        assert_eq!(
            b.complete(&req("move left 2 cm in world frame"), "").unwrap().text,
            "frame: absolute\ndirection: left"
        );
    }

    #[test]
    fn pattern_matching() {
        let m = match_pattern("put the {obj} into the {dest}", "put the red mug into the top drawer").unwrap();
        assert_eq!(m["obj"], "red mug");
        assert_eq!(m["dest"], "top drawer");
        assert!(match_pattern("open the {x}", "close the drawer").is_none());
    }
}
