use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::correction::ContextMode;

/// Switches that remove parts of the system for comparison runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ablation {
    /// No knowledge machinery; corrections are handled as fresh instructions.
    pub cap: bool,
    /// Knowledge base emptied at the start of every iteration.
    pub no_history: bool,
    /// Corrections see the whole session history instead of a slice.
    pub no_extractor: bool,
    /// Survivors ranked by task text instead of object features.
    pub no_visual: bool,
    /// No distillation; earlier final plans are handed to the planner verbatim.
    pub no_retrieval: bool,
}

impl Ablation {
    pub const TOKENS: [&'static str; 5] = ["cap", "no-history", "no-extractor", "no-visual", "no-retrieval"];

    pub fn full() -> Self {
        Ablation::default()
    }

    pub fn is_full(&self) -> bool {
        *self == Ablation::default()
    }

    pub fn retrieval(&self) -> bool {
        !self.cap && !self.no_retrieval
    }

    pub fn distillation(&self) -> bool {
        !self.cap && !self.no_retrieval
    }

    pub fn plan_archive(&self) -> bool {
        self.no_retrieval && !self.cap
    }

    pub fn fresh_kb_each_iteration(&self) -> bool {
        self.no_history
    }

    pub fn visual(&self) -> bool {
        !self.no_visual
    }

    pub fn context_mode(&self) -> ContextMode {
        if self.cap {
            ContextMode::Ungrounded
        } else if self.no_extractor {
            ContextMode::FullHistory
        } else {
            ContextMode::Extractor
        }
    }

    fn flags(&self) -> [bool; 5] {
        [self.cap, self.no_history, self.no_extractor, self.no_visual, self.no_retrieval]
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_full() {
            return f.write_str("full");
        }
        let on: Vec<&str> = Self::TOKENS.iter().zip(self.flags()).filter(|(_, b)| *b).map(|(t, _)| *t).collect();
        f.write_str(&on.join(","))
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut a = Ablation::default();
        for token in s.split(['+', ',']).map(|t| t.trim().to_lowercase().replace('_', "-")) {
            match token.as_str() {
                "full" | "" => {}
                "cap" => a.cap = true,
                "no-history" => a.no_history = true,
                "no-extractor" => a.no_extractor = true,
                "no-visual" => a.no_visual = true,
                "no-retrieval" => a.no_retrieval = true,
                other => {
                    return Err(format!(
                        "unknown ablation {other:?}; expected full or one of {}",
                        Self::TOKENS.join(", ")
                    ))
                }
            }
        }
        Ok(a)
    }
}

impl TryFrom<String> for Ablation {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Ablation> for String {
    fn from(a: Ablation) -> String {
        a.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in ["full", "cap", "no-history", "no-visual,no-retrieval", "no-extractor"] {
            assert_eq!(s.parse::<Ablation>().unwrap().to_string(), s);
        }
        assert_eq!("no_history".parse::<Ablation>().unwrap().to_string(), "no-history");
        assert!("fast".parse::<Ablation>().is_err());
        assert_eq!(serde_json::to_string(&Ablation { cap: true, ..Default::default() }).unwrap(), "\"cap\"");
    }

    #[test]
    fn cap_disables_knowledge() {
        let cap: Ablation = "cap".parse().unwrap();
        assert!(!cap.retrieval() && !cap.distillation() && !cap.plan_archive());
        assert_eq!(cap.context_mode(), ContextMode::Ungrounded);
        let r: Ablation = "no-retrieval".parse().unwrap();
        assert!(!r.distillation() && r.plan_archive());
    }
}
