use sha2::{Digest, Sha256};

use super::KnowledgeError;
use crate::sim::label_tokens;

/// Text to fixed-dimension vector.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_text(&self, text: &str) -> Vec<f64>;
}

/// Seeded token-hash projection, L2-normalized. Texts with no tokens embed to
/// the zero vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder { dim, seed }
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        let mut block = 0u32;
        while out.len() < self.dim {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update(block.to_le_bytes());
            h.update(token.as_bytes());
            let digest = h.finalize();
            for pair in digest.chunks_exact(2) {
                if out.len() == self.dim {
                    break;
                }
                let v = u16::from_le_bytes([pair[0], pair[1]]) as f64 / u16::MAX as f64;
                out.push(2.0 * v - 1.0);
            }
            block += 1;
        }
        out
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for token in label_tokens(text) {
            for (a, v) in acc.iter_mut().zip(self.token_vector(&token)) {
                *a += v;
            }
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            acc.iter_mut().for_each(|x| *x /= norm);
        }
        acc
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, KnowledgeError> {
    if a.len() != b.len() {
        return Err(KnowledgeError::Dimension { expected: a.len(), found: b.len() });
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(KnowledgeError::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
