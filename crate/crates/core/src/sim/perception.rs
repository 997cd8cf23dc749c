//! Label-token perception stub over ground-truth scene records.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use super::{SimError, WorldState};

const STOPWORDS: &[&str] = &["the", "a", "an"];

/// Lowercased alphanumeric tokens with articles removed.
pub fn label_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '-')
        .map(|t| t.trim_matches('-').to_lowercase())
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Match rank of one object for a query: exact label, then token containment
/// in either direction, then category mention.
fn score(query: &[String], label: &[String], category: &str) -> (u8, usize, Reverse<usize>) {
    let q: BTreeSet<&String> = query.iter().collect();
    let l: BTreeSet<&String> = label.iter().collect();
    let overlap = q.intersection(&l).count();
    let unmatched = l.len() - overlap;
    let rank = if query == label {
        3
    } else if !l.is_empty() && (q.is_subset(&l) || l.is_subset(&q)) {
        2
    } else if query.iter().any(|t| t == category) {
        1
    } else {
        0
    };
    (rank, overlap, Reverse(unmatched))
}

/// Resolve a free-text label to a unique object id.
pub fn detect(world: &WorldState, label: &str) -> Result<String, SimError> {
    let query = label_tokens(label);
    if query.is_empty() {
        return Err(SimError::NotFound(label.to_string()));
    }
    let mut scored: Vec<_> = world
        .objects
        .values()
        .map(|o| (score(&query, &label_tokens(&o.label), &o.category.to_lowercase()), o.id.clone()))
        .filter(|(s, _)| s.0 > 0)
        .collect();
    // best first; ids ascending among equals
    scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    match scored.as_slice() {
        [] => Err(SimError::NotFound(label.to_string())),
        [(top, id), rest @ ..] => {
            let tied: Vec<String> = rest.iter().filter(|(s, _)| s == top).map(|(_, id)| id.clone()).collect();
            if tied.is_empty() {
                Ok(id.clone())
            } else {
                let mut candidates = vec![id.clone()];
                candidates.extend(tied);
                Err(SimError::Ambiguous { label: label.to_string(), candidates })
            }
        }
    }
}
