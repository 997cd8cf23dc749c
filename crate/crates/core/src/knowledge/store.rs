use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;

use super::{GlobalKnowledge, KnowledgeEntry, KnowledgeError, KnowledgeKind, Scope, DEFAULT_DIM};
use crate::canonical::{self, quantize};
use crate::composer::ParamValue;

pub const HEADER_PREFIX: &str = "lessons-kb v1";

pub type SharedKb = Arc<RwLock<KnowledgeBase>>;

/// Entries keyed by id. Writes replace a whole entry, so a reader holding the
/// lock never sees a partial one.
#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeBase {
    dim: usize,
    entries: BTreeMap<String, KnowledgeEntry>,
    sequence: u64,
    writes: u64,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        KnowledgeBase::new(DEFAULT_DIM)
    }
}

fn quantize_entry(e: &mut KnowledgeEntry) {
    for v in e.task_params.values_mut() {
        match v {
            ParamValue::Scalar(x) => *x = quantize(*x),
            ParamValue::Vector(xs) => *xs = xs.map(quantize),
            ParamValue::Label(_) => {}
        }
    }
    if let Some(info) = e.object_info.as_mut() {
        info.feature.iter_mut().for_each(|x| *x = quantize(*x));
    }
}

impl KnowledgeBase {
    pub fn new(dim: usize) -> Self {
        KnowledgeBase { dim, entries: BTreeMap::new(), sequence: 0, writes: 0 }
    }

    pub fn shared(self) -> SharedKb {
        Arc::new(RwLock::new(self))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of mutations since construction or load.
    pub fn write_count(&self) -> u64 {
        self.writes
    }

    /// Insert or overwrite by id; the stored copy gets the next sequence number.
    pub fn put(&mut self, mut entry: KnowledgeEntry) -> Result<String, KnowledgeError> {
        entry.validate()?;
        if let Some(f) = entry.feature() {
            if f.len() != self.dim {
                return Err(KnowledgeError::Dimension { expected: self.dim, found: f.len() });
            }
        }
        quantize_entry(&mut entry);
        let id = entry.id();
        if let Some(old) = self.entries.get(&id) {
            if old.constraints != entry.constraints || old.preferences != entry.preferences {
                tracing::warn!(%id, "distilled knowledge conflicts with an earlier entry; keeping the latest");
            }
        }
        self.sequence += 1;
        entry.provenance.sequence = self.sequence;
        self.entries.insert(id.clone(), entry);
        self.writes += 1;
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<&KnowledgeEntry> {
        self.entries.get(id)
    }

    /// All entries ordered by id.
    pub fn list(&self) -> Vec<&KnowledgeEntry> {
        self.entries.values().collect()
    }

    /// Task-scope entries of one kind, oldest first.
    pub fn chronological(&self, kind: KnowledgeKind) -> Vec<&KnowledgeEntry> {
        let mut v: Vec<&KnowledgeEntry> =
            self.entries.values().filter(|e| e.kind == kind && e.scope == Scope::Task).collect();
        v.sort_by_key(|e| e.provenance.sequence);
        v
    }

    pub fn global(&self) -> GlobalKnowledge {
        let mut g = GlobalKnowledge::default();
        let mut globals: Vec<&KnowledgeEntry> = self.entries.values().filter(|e| e.scope == Scope::Global).collect();
        globals.sort_by_key(|e| e.provenance.sequence);
        for e in globals {
            g.robot_constraints.extend(e.constraints.iter().cloned());
            g.user_preferences.extend(e.preferences.iter().cloned());
        }
        g
    }

    pub fn delete(&mut self, id: &str) -> Option<KnowledgeEntry> {
        let removed = self.entries.remove(id);
        if removed.is_some() {
            self.writes += 1;
        }
        removed
    }

    /// Canonical file text: header, one entry per line sorted by id, checksum.
    pub fn to_text(&self) -> String {
        let mut body = format!("{HEADER_PREFIX} dim={}\n", self.dim);
        for e in self.entries.values() {
            body.push_str(&canonical::to_string(e).expect("entries always serialize"));
            body.push('\n');
        }
        let crc = crc32fast::hash(body.as_bytes());
        body.push_str(&format!("crc32 {crc:08x}\n"));
        body
    }

    pub fn from_text(text: &str) -> Result<Self, KnowledgeError> {
        let corrupt = |m: String| KnowledgeError::CorruptFile(m);
        let body_end = text
            .trim_end_matches('\n')
            .rfind('\n')
            .map(|i| i + 1)
            .ok_or_else(|| corrupt("missing checksum line".into()))?;
        let (body, trailer) = text.split_at(body_end);
        let stated = trailer
            .trim()
            .strip_prefix("crc32 ")
            .and_then(|h| u32::from_str_radix(h, 16).ok())
            .ok_or_else(|| corrupt("missing checksum line".into()))?;
        let actual = crc32fast::hash(body.as_bytes());
        if stated != actual {
            return Err(corrupt(format!("checksum {stated:08x} does not match contents {actual:08x}")));
        }
        let mut lines = body.lines();
        let header = lines.next().unwrap_or_default();
        let dim = header
            .strip_prefix(HEADER_PREFIX)
            .and_then(|rest| rest.trim().strip_prefix("dim="))
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|d| *d > 0)
            .ok_or_else(|| corrupt(format!("unsupported header {header:?}")))?;
        let mut kb = KnowledgeBase::new(dim);
        for (n, line) in lines.enumerate() {
            let entry: KnowledgeEntry =
                serde_json::from_str(line).map_err(|e| corrupt(format!("line {}: {e}", n + 2)))?;
            entry.validate().map_err(|e| corrupt(e.to_string()))?;
            let id = entry.id();
            kb.sequence = kb.sequence.max(entry.provenance.sequence);
            if kb.entries.insert(id.clone(), entry).is_some() {
                return Err(corrupt(format!("duplicate id {id}")));
            }
        }
        Ok(kb)
    }

    pub fn save(&self, path: &Path) -> Result<(), KnowledgeError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text()).map_err(|e| KnowledgeError::Io(e.to_string()))?;
        std::fs::rename(&tmp, path).map_err(|e| KnowledgeError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        let text = std::fs::read_to_string(path).map_err(|e| KnowledgeError::Io(e.to_string()))?;
        Self::from_text(&text)
    }
}
