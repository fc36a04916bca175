use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNK: &str = "<UNK>";
pub const PAD: &str = "<PAD>";
pub const UNK_ID: u32 = 0;
pub const PAD_ID: u32 = 1;

/// Dense token ↔ id map. Ids 0 and 1 are reserved for UNK and PAD.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabDoc", into = "VocabDoc")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    min_count: usize,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct VocabDoc {
    min_count: usize,
    frozen: bool,
    tokens: Vec<String>,
}

impl From<VocabDoc> for Vocabulary {
    fn from(doc: VocabDoc) -> Self {
        Vocabulary::from_tokens(doc.tokens, doc.min_count, doc.frozen)
    }
}

impl From<Vocabulary> for VocabDoc {
    fn from(v: Vocabulary) -> Self {
        VocabDoc {
            min_count: v.min_count,
            frozen: v.frozen,
            tokens: v.tokens,
        }
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary::from_tokens(vec![UNK.to_string(), PAD.to_string()], 1, false)
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>, min_count: usize, frozen: bool) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            tokens,
            index,
            min_count,
            frozen,
        }
    }

    pub fn insert(&mut self, token: &str) -> Result<u32> {
        if let Some(&id) = self.index.get(token) {
            return Ok(id);
        }
        if self.frozen {
            return Err(Error::InvalidArgument(format!(
                "vocabulary is frozen; cannot insert `{token}`"
            )));
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        Ok(id)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Id of `token`, or UNK when absent.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }
}

/// Frequency counts that can be merged in any order before assigning ids.
#[derive(Debug, Clone, Default)]
pub struct VocabularyBuilder {
    counts: HashMap<String, u64>,
    observations: u64,
}

impl VocabularyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, token: &str) {
        self.observations += 1;
        if token == UNK || token == PAD {
            return;
        }
        *self.counts.entry(token.to_string()).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: VocabularyBuilder) {
        self.observations += other.observations;
        for (t, c) in other.counts {
            *self.counts.entry(t).or_insert(0) += c;
        }
    }

    /// Frozen vocabulary of tokens seen at least `min_count` times, ids by
    /// descending frequency with ties broken lexicographically.
    pub fn build(self, min_count: usize) -> Result<Vocabulary> {
        if self.observations == 0 {
            return Err(Error::Empty("cannot build a vocabulary from an empty stream".into()));
        }
        let mut entries: Vec<(String, u64)> = self
            .counts
            .into_iter()
            .filter(|(_, c)| *c as usize >= min_count)
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![UNK.to_string(), PAD.to_string()];
        tokens.extend(entries.into_iter().map(|(t, _)| t));
        Ok(Vocabulary::from_tokens(tokens, min_count, true))
    }
}

pub fn build_vocab<I, S>(stream: I, min_count: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut builder = VocabularyBuilder::new();
    for t in stream {
        builder.add(t.as_ref());
    }
    builder.build(min_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_count_threshold() {
        let v = build_vocab(["foo", "bar", "foo", "foo"], 2).unwrap();
        assert!(v.contains("foo"));
        assert_eq!(v.id("bar"), UNK_ID);
        let v = build_vocab(["foo", "bar", "foo", "foo"], 1).unwrap();
        assert!(v.contains("foo") && v.contains("bar"));
        assert_eq!(v.id("foo"), 2);
        assert_eq!(v.id("bar"), 3);
    }

    #[test]
    fn frozen_rejects_insertion() {
        let mut v = build_vocab(["a"], 1).unwrap();
        assert_eq!(v.id("baz"), UNK_ID);
        assert!(v.insert("baz").is_err());
        assert_eq!(v.len(), 3);
        let mut open = Vocabulary::new();
        assert_eq!(open.insert("x").unwrap(), 2);
        open.freeze();
        assert!(open.insert("y").is_err());
    }

    #[test]
    fn empty_stream() {
        assert!(build_vocab(Vec::<String>::new(), 1).is_err());
    }

    #[test]
    fn reserved_ids() {
        let v = build_vocab(["z", PAD, "a"], 1).unwrap();
        assert_eq!(v.id(UNK), UNK_ID);
        assert_eq!(v.id(PAD), PAD_ID);
        // Equal counts fall back to lexicographic order.
        assert_eq!(v.tokens(), [UNK, PAD, "a", "z"]);
    }

    #[test]
    fn merge_order_is_irrelevant() {
        let words = ["q", "r", "q", "s", "r", "q", "t"];
        let mut a = VocabularyBuilder::new();
        let mut b = VocabularyBuilder::new();
        for (i, w) in words.iter().enumerate() {
            if i % 2 == 0 { a.add(w) } else { b.add(w) }
        }
        let mut ab = a.clone();
        ab.merge(b.clone());
        let mut ba = b;
        ba.merge(a);
        assert_eq!(ab.build(1).unwrap(), ba.build(1).unwrap());
    }

    #[test]
    fn serde_round_trip() {
        let v = build_vocab(["a", "b", "b"], 1).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
        assert_eq!(back.id("b"), 2);
    }
}
