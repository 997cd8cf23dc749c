use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    cosine, Embedder, GlobalKnowledge, KnowledgeBase, KnowledgeEntry, KnowledgeError, KnowledgeKind, VISUAL_THRESHOLD,
};
use crate::lm::{Gateway, PromptKind, PromptRequest, Reply, Transcript};
use crate::sim::label_tokens;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrieveConfig {
    /// Rank survivors by object features; otherwise by text similarity of keys.
    pub visual: bool,
    pub threshold: f64,
}

impl Default for RetrieveConfig {
    fn default() -> Self {
        RetrieveConfig { visual: true, threshold: VISUAL_THRESHOLD }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub global: GlobalKnowledge,
    pub specific: Option<KnowledgeEntry>,
    /// Ids that passed the semantic filter, oldest first.
    pub survivors: Vec<String>,
    /// Similarity of each ranked survivor.
    pub scores: Vec<(String, f64)>,
}

/// Index of the highest score, first one on ties.
pub fn brute_force_argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub struct Retriever<'a> {
    pub gateway: &'a Gateway,
    pub kb: &'a KnowledgeBase,
    pub embedder: &'a dyn Embedder,
    pub config: RetrieveConfig,
    pub cross_modal: &'a BTreeMap<String, Vec<f64>>,
}

impl Retriever<'_> {
    fn semantic_survivors(
        &self,
        transcript: &mut Transcript,
        kind: KnowledgeKind,
        query_task: &str,
    ) -> Result<Vec<&KnowledgeEntry>, KnowledgeError> {
        let candidates = self.kb.chronological(kind);
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let previous = candidates.iter().map(|e| e.key.as_str()).collect::<Vec<_>>().join("\n");
        let req = PromptRequest::new(PromptKind::RetrieveSemantic)
            .with("previous_tasks", previous)
            .with("new_task", query_task);
        match self.gateway.complete(&req, transcript)? {
            Reply::Semantic { same_category: true, tasks } => {
                let mut picked: Vec<usize> = tasks.into_iter().filter(|n| (1..=candidates.len()).contains(n)).collect();
                picked.sort_unstable();
                picked.dedup();
                Ok(picked.into_iter().map(|n| candidates[n - 1]).collect())
            }
            Reply::Semantic { .. } => Ok(Vec::new()),
            other => Err(crate::lm::unexpected(PromptKind::RetrieveSemantic, &other).into()),
        }
    }

    /// Semantic category filter, then similarity ranking among survivors.
    pub fn retrieve(
        &self,
        transcript: &mut Transcript,
        kind: KnowledgeKind,
        query_task: &str,
        query_feature: Option<&[f64]>,
    ) -> Result<Retrieval, KnowledgeError> {
        let survivors = self.semantic_survivors(transcript, kind, query_task)?;
        let mut out = Retrieval {
            global: self.kb.global(),
            survivors: survivors.iter().map(|e| e.id()).collect(),
            ..Default::default()
        };
        let query_feature = query_feature.filter(|f| !f.is_empty() && f.iter().any(|x| *x != 0.0));
        match (self.config.visual, query_feature) {
            (true, Some(q)) => {
                let ranked: Vec<(&KnowledgeEntry, f64)> = survivors
                    .iter()
                    .filter_map(|e| e.feature().and_then(|f| cosine(q, f).ok()).map(|s| (*e, s)))
                    .collect();
                out.scores = ranked.iter().map(|(e, s)| (e.id(), *s)).collect();
                let scores: Vec<f64> = ranked.iter().map(|(_, s)| *s).collect();
                if let Some(i) = brute_force_argmax(&scores) {
                    if scores[i] >= self.config.threshold {
                        out.specific = Some(ranked[i].0.clone());
                    }
                }
            }
            (false, Some(_)) => {
                let q = self.embedder.embed_text(query_task);
                let ranked: Vec<(&KnowledgeEntry, f64)> = survivors
                    .iter()
                    .map(|e| (*e, cosine(&q, &self.embedder.embed_text(&e.key)).unwrap_or(-1.0)))
                    .collect();
                out.scores = ranked.iter().map(|(e, s)| (e.id(), *s)).collect();
                let scores: Vec<f64> = ranked.iter().map(|(_, s)| *s).collect();
                out.specific = brute_force_argmax(&scores).map(|i| ranked[i].0.clone());
            }
            (_, None) => out.specific = survivors.last().map(|e| (*e).clone()),
        }
        Ok(out)
    }

    /// Rank entries against a feature prototype built from the visual words of
    /// an object name. `None` when the name carries no known visual word.
    pub fn visual_semantic(&self, kind: KnowledgeKind, query_name: &str) -> Option<KnowledgeEntry> {
        let mut proto: Option<Vec<f64>> = None;
        for t in label_tokens(query_name) {
            if let Some(p) = self.cross_modal.get(&t) {
                match proto.as_mut() {
                    Some(acc) if acc.len() == p.len() => acc.iter_mut().zip(p).for_each(|(a, b)| *a += b),
                    Some(_) => tracing::warn!(token = %t, "cross-modal prototype has mismatched dimension"),
                    None => proto = Some(p.clone()),
                }
            }
        }
        let proto = proto?;
        let entries = self.kb.chronological(kind);
        let ranked: Vec<(&KnowledgeEntry, f64)> =
            entries.iter().filter_map(|e| e.feature().and_then(|f| cosine(&proto, f).ok()).map(|s| (*e, s))).collect();
        let scores: Vec<f64> = ranked.iter().map(|(_, s)| *s).collect();
        brute_force_argmax(&scores).filter(|i| scores[*i] >= self.config.threshold).map(|i| ranked[i].0.clone())
    }

    /// Visual-semantic lookup when the name has visual words, else
    /// [`Retriever::retrieve`].
    pub fn retrieve_by_name(
        &self,
        transcript: &mut Transcript,
        kind: KnowledgeKind,
        query_task: &str,
        query_name: &str,
    ) -> Result<Retrieval, KnowledgeError> {
        let has_visual = label_tokens(query_name).iter().any(|t| self.cross_modal.contains_key(t));
        if !has_visual {
            return self.retrieve(transcript, kind, query_task, None);
        }
        Ok(Retrieval {
            global: self.kb.global(),
            specific: self.visual_semantic(kind, query_name),
            ..Default::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{HashEmbedder, ObjectInfo, Scope};
    use super::*;
    use crate::lm::BackendRules;

    fn entry(key: &str, feature: Vec<f64>) -> KnowledgeEntry {
        let mut e = KnowledgeEntry::new(key, KnowledgeKind::SkillLevel);
        e.object_info = Some(ObjectInfo { label: key.into(), feature });
        e
    }

    fn kb(entries: Vec<KnowledgeEntry>) -> KnowledgeBase {
        let mut kb = KnowledgeBase::new(3);
        for e in entries {
            kb.put(e).unwrap();
        }
        kb
    }

    fn run(kb: &KnowledgeBase, visual: bool, task: &str, q: Option<&[f64]>) -> Retrieval {
        let gw = Gateway::scripted(BackendRules::default());
        let emb = HashEmbedder::new(3, 0);
        let cm = BTreeMap::new();
        let r = Retriever {
            gateway: &gw,
            kb,
            embedder: &emb,
            config: RetrieveConfig { visual, ..Default::default() },
            cross_modal: &cm,
        };
        r.retrieve(&mut Transcript::default(), KnowledgeKind::SkillLevel, task, q).unwrap()
    }

    #[test]
    fn semantic_filter_matches_prompt_example() {
        let kb = kb(vec![
            entry("Open top drawer", vec![1.0, 0.0, 0.0]),
            entry("Pick scissors", vec![0.0, 1.0, 0.0]),
            entry("Put mug", vec![0.0, 0.0, 1.0]),
            entry("Pick yellow marker", vec![0.0, 1.0, 0.1]),
        ]);
        let r = run(&kb, true, "Pick up the spoon", Some(&[0.0, 1.0, 0.05]));
        assert_eq!(r.survivors, vec!["skill/pick scissors".to_string(), "skill/pick yellow marker".to_string()]);
        assert_eq!(r.specific.unwrap().key, "Pick yellow marker");
    }

    #[test]
    fn empty_kb_yields_nothing_specific() {
        let r = run(&KnowledgeBase::new(3), true, "Open the drawer", Some(&[1.0, 0.0, 0.0]));
        assert_eq!(r, Retrieval::default());
    }

    #[test]
    fn threshold_suppresses_dissimilar_objects() {
        let kb = kb(vec![entry("Open the cabinet", vec![1.0, 0.0, 0.0])]);
        assert!(run(&kb, true, "Open the drawer", Some(&[0.0, 1.0, 0.0])).specific.is_none());
        assert!(run(&kb, true, "Open the drawer", Some(&[1.0, 0.1, 0.0])).specific.is_some());
    }

    #[test]
    fn global_entries_are_always_returned() {
        let mut g = KnowledgeEntry::new("Robot only has one hand", KnowledgeKind::PlanLevel);
        g.scope = Scope::Global;
        g.constraints.push("Robot only has one hand".into());
        let kb = kb(vec![g]);
        let r = run(&kb, true, "Slice the carrot", None);
        assert_eq!(r.global.robot_constraints.len(), 1);
        assert!(r.specific.is_none());
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(brute_force_argmax(&[0.5, 0.9, 0.9]), Some(1));
        assert_eq!(brute_force_argmax(&[]), None);
    }

    #[test]
    fn visual_semantic_uses_prototypes() {
        let kb = kb(vec![
            entry("Open the white drawer", vec![0.9, 0.1, 0.0]),
            entry("Open the gray drawer", vec![0.1, 0.9, 0.0]),
        ]);
        let gw = Gateway::scripted(BackendRules::default());
        let emb = HashEmbedder::new(3, 0);
        let mut cm = BTreeMap::new();
        cm.insert("white".to_string(), vec![1.0, 0.0, 0.0]);
        cm.insert("gray".to_string(), vec![0.0, 1.0, 0.0]);
        let r =
            Retriever { gateway: &gw, kb: &kb, embedder: &emb, config: RetrieveConfig::default(), cross_modal: &cm };
        assert_eq!(r.visual_semantic(KnowledgeKind::SkillLevel, "white drawer").unwrap().key, "Open the white drawer");
        assert_eq!(r.visual_semantic(KnowledgeKind::SkillLevel, "gray drawer").unwrap().key, "Open the gray drawer");
        assert!(r.visual_semantic(KnowledgeKind::SkillLevel, "drawer").is_none());
        let fallback = r
            .retrieve_by_name(&mut Transcript::default(), KnowledgeKind::SkillLevel, "Open the drawer", "drawer")
            .unwrap();
        assert_eq!(fallback.specific.unwrap().key, "Open the gray drawer");
        let empty = KnowledgeBase::new(3);
        let r = Retriever { kb: &empty, ..r };
        assert!(r.visual_semantic(KnowledgeKind::SkillLevel, "white drawer").is_none());
    }
}
