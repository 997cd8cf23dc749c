use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{LmError, PromptKind};
use crate::correction::Dependence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    High,
    Low,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Absolute,
    ObjectCentric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
    Left,
    Right,
    Up,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 6] =
        [Direction::Forward, Direction::Backward, Direction::Left, Direction::Right, Direction::Up, Direction::Down];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameReply {
    pub frame: Frame,
    pub direction: Option<Direction>,
}

/// The four distillation sections, raw.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distilled {
    pub knowledge: String,
    pub variables: String,
    pub modified: String,
    pub object_state: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "value")]
pub enum Reply {
    Plan(Vec<String>),
    Program(String),
    Level(Level),
    Dependence(Dependence),
    Frame(FrameReply),
    Distilled(Distilled),
    Semantic { same_category: bool, tasks: Vec<usize> },
}

fn format_error(kind: PromptKind, message: impl Into<String>) -> LmError {
    LmError::ModelFormat { kind, message: message.into() }
}

static PLAN_ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"(\d+)\s*:\s*"([^"]*)""#).expect("static"));
static SEMANTIC_YES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"(?i)1\s*:\s*"?(yes|no)"?"#).expect("static"));
static SEMANTIC_LIST: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"2\s*:\s*\[([^\]]*)\]").expect("static"));
static DEP_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(([abc])\)").expect("static"));
static SECTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^\s*(Task-related knowledge|Variables to save|Modified code/plan|Updated object state)\s*:")
        .expect("static")
});

fn strip_fences(text: &str) -> String {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t.to_string();
    };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().trim_end_matches("```").trim().to_string()
}

fn parse_plan(kind: PromptKind, text: &str) -> Result<Vec<String>, LmError> {
    let mut skills = Vec::new();
    for (i, cap) in PLAN_ITEM.captures_iter(text).enumerate() {
        let n: usize = cap[1].parse().map_err(|_| format_error(kind, "bad item number"))?;
        if n != i + 1 {
            return Err(format_error(kind, format!("expected item {}, found {n}", i + 1)));
        }
        let skill = cap[2].trim();
        if skill.is_empty() {
            return Err(format_error(kind, format!("item {n} is empty")));
        }
        skills.push(skill.to_string());
    }
    if skills.is_empty() {
        return Err(format_error(kind, "expected numbered skill list `1: \"...\"`"));
    }
    Ok(skills)
}

fn parse_distilled(kind: PromptKind, text: &str) -> Result<Distilled, LmError> {
    let marks: Vec<_> = SECTION
        .captures_iter(text)
        .map(|c| {
            let whole = c.get(0).expect("match");
            (c[1].to_string(), whole.start(), whole.end())
        })
        .collect();
    let order = ["Task-related knowledge", "Variables to save", "Modified code/plan", "Updated object state"];
    let mut bodies = Vec::new();
    for (i, want) in order.iter().enumerate() {
        let Some((name, _, end)) = marks.get(i) else {
            return Err(format_error(kind, format!("missing section {want:?}")));
        };
        if name != want {
            return Err(format_error(kind, format!("expected section {want:?}, found {name:?}")));
        }
        let stop = marks.get(i + 1).map_or(text.len(), |m| m.1);
        bodies.push(text[*end..stop].trim().to_string());
    }
    let mut it = bodies.into_iter();
    let mut next = || it.next().expect("four sections");
    Ok(Distilled { knowledge: next(), variables: next(), modified: next(), object_state: next() })
}

fn field_line<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| {
        let (k, v) = l.split_once(':')?;
        (k.trim().eq_ignore_ascii_case(key)).then(|| v.trim())
    })
}

/// Parse a raw reply according to the schema of `kind`.
pub fn parse_reply(kind: PromptKind, raw: &str) -> Result<Reply, LmError> {
    let text = raw.trim();
    if text.is_empty() {
        return Err(format_error(kind, "empty reply"));
    }
    match kind {
        PromptKind::Plan | PromptKind::Replan => parse_plan(kind, text).map(Reply::Plan),
        PromptKind::Compose | PromptKind::Recompose => Ok(Reply::Program(strip_fences(text))),
        PromptKind::LevelClassify => {
            let t = text.to_lowercase();
            match (t.contains("high"), t.contains("low")) {
                (true, false) => Ok(Reply::Level(Level::High)),
                (false, true) => Ok(Reply::Level(Level::Low)),
                _ => Err(format_error(kind, "expected exactly one of high/low")),
            }
        }
        PromptKind::DependenceClassify => {
            let markers: Vec<String> = DEP_MARKER.captures_iter(text).map(|c| c[1].to_string()).collect();
            match markers.as_slice() {
                [m] => Ok(Reply::Dependence(match m.as_str() {
                    "a" => Dependence::Last,
                    "b" => Dependence::Initial,
                    _ => Dependence::None,
                })),
                [] => Err(format_error(kind, "expected one of (a), (b), (c)")),
                _ => Err(format_error(kind, "more than one dependence marker")),
            }
        }
        PromptKind::FrameResolve => {
            let frame = match field_line(text, "frame").map(str::to_lowercase).as_deref() {
                Some("object-centric") | Some("object centric") | Some("object") => Frame::ObjectCentric,
                Some("absolute") | Some("world") => Frame::Absolute,
                _ => return Err(format_error(kind, "expected `frame: object-centric|absolute`")),
            };
            let direction = match field_line(text, "direction").map(str::to_lowercase) {
                None => return Err(format_error(kind, "expected `direction:` line")),
                Some(d) if d == "none" => None,
                Some(d) => Some(
                    Direction::ALL
                        .into_iter()
                        .find(|x| x.as_str() == d)
                        .ok_or_else(|| format_error(kind, format!("unknown direction {d:?}")))?,
                ),
            };
            Ok(Reply::Frame(FrameReply { frame, direction }))
        }
        PromptKind::DistillSkill | PromptKind::DistillPlan => parse_distilled(kind, text).map(Reply::Distilled),
        PromptKind::RetrieveSemantic => {
            let yes = SEMANTIC_YES
                .captures(text)
                .ok_or_else(|| format_error(kind, "expected `1: \"Yes\"` or `1: \"No\"`"))?;
            let same_category = yes[1].eq_ignore_ascii_case("yes");
            let tasks = match SEMANTIC_LIST.captures(text) {
                Some(c) => c[1]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>().map_err(|_| format_error(kind, format!("bad task number {s:?}"))))
                    .collect::<Result<Vec<_>, _>>()?,
                None if !same_category => Vec::new(),
                None => return Err(format_error(kind, "expected `2: [...]`")),
            };
            Ok(Reply::Semantic { same_category, tasks: if same_category { tasks } else { Vec::new() } })
        }
    }
}
