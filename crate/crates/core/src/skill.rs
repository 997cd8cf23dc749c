//! Skill-description parsing shared by the simulator, composer and user oracle.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillCategory {
    Open,
    Close,
    PickUp,
    Put,
    Hang,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkillIntent {
    pub category: SkillCategory,
    pub object: String,
    pub destination: Option<String>,
}

static PATTERNS: LazyLock<Vec<(SkillCategory, Regex)>> = LazyLock::new(|| {
    let p = |s: &str| Regex::new(s).expect("static pattern");
    vec![
        (SkillCategory::Open, p(r"^open (?:the )?(?P<obj>.+)$")),
        (SkillCategory::Close, p(r"^(?:close|shut) (?:the )?(?P<obj>.+)$")),
        (SkillCategory::PickUp, p(r"^(?:pick up|grab|take) (?:the )?(?P<obj>.+?)(?: from (?:the )?.+)?$")),
        (
            SkillCategory::Put,
            p(r"^(?:put|place)(?: down)? (?:the )?(?P<obj>.+?) (?:into|in|on|onto|inside) (?:the )?(?P<dest>.+)$"),
        ),
        (SkillCategory::Hang, p(r"^hang (?:the )?(?P<obj>.+?) on (?:the )?(?P<dest>.+)$")),
    ]
});

/// Lowercase, trim quotes and trailing punctuation, collapse whitespace.
pub fn normalize(text: &str) -> String {
    text.trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == ',' || c == '!')
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

pub fn parse_skill(text: &str) -> Option<SkillIntent> {
    let t = normalize(text);
    PATTERNS.iter().find_map(|(category, re)| {
        re.captures(&t).map(|c| SkillIntent {
            category: *category,
            object: c["obj"].to_string(),
            destination: c.name("dest").map(|d| d.as_str().to_string()),
        })
    })
}
