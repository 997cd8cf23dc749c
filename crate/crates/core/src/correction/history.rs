use serde::{Deserialize, Serialize};

use super::{Author, CorrectionError, Dependence};
use crate::dsl::Span;
use crate::lm::Level;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub text: String,
    pub skill_index: usize,
    pub round: usize,
    pub span: Option<Span>,
    pub author: Author,
}

/// What a correction turned into, kept compact for later prompts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolutionRecord {
    Replan { skills: Vec<String> },
    Program { program: String, resume_at: usize, interpretation: String, displacement: Option<[f64; 3]> },
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub plan: Vec<String>,
    pub skill_index: usize,
    pub skill: String,
    pub program: String,
    pub correction: Correction,
    pub level: Option<Level>,
    pub dependence: Option<Dependence>,
    pub solution: SolutionRecord,
}

impl HistoryEntry {
    pub fn displacement(&self) -> Option<[f64; 3]> {
        match &self.solution {
            SolutionRecord::Program { displacement, .. } => *displacement,
            _ => None,
        }
    }

    /// One-paragraph rendering used inside prompts.
    pub fn describe(&self) -> String {
        let solution = match &self.solution {
            SolutionRecord::Replan { skills } => format!("replanned: {}", skills.join("; ")),
            SolutionRecord::Program { interpretation, .. } => format!("new program ({interpretation})"),
            SolutionRecord::Failed { error } => format!("not handled: {error}"),
        };
        format!(
            "Sub-task: {}\nProgram: {}\nCorrection: \"{}\"\nSolution: {solution}",
            self.skill,
            self.program.replace('\n', "; "),
            self.correction.text
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionHistory {
    pub entries: Vec<HistoryEntry>,
}

impl InteractionHistory {
    pub fn push(&mut self, entry: HistoryEntry) {
        self.entries.push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn for_skill(&self, skill_index: usize) -> Vec<&HistoryEntry> {
        self.entries.iter().filter(|e| e.skill_index == skill_index).collect()
    }
}

/// The slice of a skill's history a correction depends on.
pub fn extract_context<'a>(
    skill_entries: &[&'a HistoryEntry],
    dependence: Dependence,
) -> Result<Vec<&'a HistoryEntry>, CorrectionError> {
    match dependence {
        Dependence::None => Ok(Vec::new()),
        Dependence::Last => skill_entries.last().map(|e| vec![*e]).ok_or(CorrectionError::EmptyHistory),
        Dependence::Initial => skill_entries.first().map(|e| vec![*e]).ok_or(CorrectionError::EmptyHistory),
    }
}
