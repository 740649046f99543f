use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ index map. Index 0 is padding, 1 is unknown; real tokens start at 2
/// in descending frequency order, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "VocabRepr", from = "VocabRepr")]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<usize>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
    counts: Vec<usize>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        Vocab::from_parts(r.tokens, r.counts)
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            tokens: v.tokens,
            counts: v.counts,
        }
    }
}

impl Vocab {
    pub fn build<'a, I, D>(docs: I, min_count: usize) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        if min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        let mut freq: HashMap<&str, usize> = HashMap::new();
        let mut any = false;
        for doc in docs {
            any = true;
            for tok in doc {
                *freq.entry(tok.as_str()).or_default() += 1;
            }
        }
        if !any || freq.is_empty() {
            return Err(Error::Data("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut kept: Vec<(&str, usize)> = freq
            .into_iter()
            .filter(|&(t, c)| c >= min_count && t != PAD_TOKEN && t != UNK_TOKEN)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut counts = vec![0, 0];
        for (t, c) in kept {
            tokens.push(t.to_string());
            counts.push(c);
        }
        Ok(Self::from_parts(tokens, counts))
    }

    fn from_parts(tokens: Vec<String>, counts: Vec<usize>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, counts, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    /// Index of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> usize {
        match self.index.get(token) {
            Some(&i) if i >= 2 => i,
            _ => UNK,
        }
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied().filter(|&i| i >= 2)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> usize {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokens of ids ≥ 2; pads and unknowns are dropped.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter(|&&i| i >= 2)
            .filter_map(|&i| self.tokens.get(i).cloned())
            .collect()
    }

    /// Hex SHA-256 over the ordered token list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}
