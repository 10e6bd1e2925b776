use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const BOS: &str = "[BOS]";
pub const EOS: &str = "[EOS]";
pub const UNK: &str = "[UNK]";
pub const SENT: &str = "[sent]";
pub const LOCATION: &str = "[location]";

/// Placeholder slots per gender.
pub const SLOTS_PER_GENDER: usize = 5;

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const SENT_ID: u32 = 4;
pub const LOCATION_ID: u32 = 5;

pub fn male_placeholder(k: usize) -> String {
    format!("[male{k}]")
}

pub fn female_placeholder(k: usize) -> String {
    format!("[female{k}]")
}

/// Special tokens in id order.
pub fn special_tokens() -> Vec<String> {
    let mut v: Vec<String> = [PAD, BOS, EOS, UNK, SENT, LOCATION]
        .iter()
        .map(|s| s.to_string())
        .collect();
    v.extend((0..SLOTS_PER_GENDER).map(male_placeholder));
    v.extend((0..SLOTS_PER_GENDER).map(female_placeholder));
    v
}

/// Whether `tok` is a person placeholder (`[maleK]` / `[femaleK]`).
pub fn is_person_placeholder(tok: &str) -> bool {
    let inner = match tok.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
        Some(i) => i,
        None => return false,
    };
    let digits = inner
        .strip_prefix("female")
        .or_else(|| inner.strip_prefix("male"));
    matches!(digits, Some(d) if d.parse::<usize>().is_ok_and(|k| k < SLOTS_PER_GENDER) && d.len() == 1)
}

/// Token ↔ id bijection. Specials occupy the lowest ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    min_freq: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabFile {
    min_freq: usize,
    tokens: Vec<String>,
}

impl TryFrom<VocabFile> for Vocabulary {
    type Error = Error;
    fn try_from(f: VocabFile) -> Result<Self> {
        let specials = special_tokens();
        if f.tokens.len() < specials.len() || f.tokens[..specials.len()] != specials[..] {
            return Err(Error::Data(
                "vocabulary does not start with the special tokens".into(),
            ));
        }
        let mut index = HashMap::with_capacity(f.tokens.len());
        for (i, t) in f.tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary {
            tokens: f.tokens,
            index,
            min_freq: f.min_freq,
        })
    }
}

impl From<Vocabulary> for VocabFile {
    fn from(v: Vocabulary) -> Self {
        VocabFile {
            min_freq: v.min_freq,
            tokens: v.tokens,
        }
    }
}

impl Vocabulary {
    /// Vocabulary of `tokens` after the specials; used for hand-built vocabularies.
    pub fn with_tokens<S: AsRef<str>>(extra: &[S]) -> Result<Self> {
        let mut tokens = special_tokens();
        tokens.extend(extra.iter().map(|s| s.as_ref().to_string()));
        Vocabulary::try_from(VocabFile {
            min_freq: 1,
            tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(UNK_ID))
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK).to_string())
            .collect()
    }
}

/// Keeps tokens seen at least `min_freq` times, ordered by descending
/// frequency and then lexicographically. Specials are always present.
pub fn build_vocab<S: AsRef<str>>(corpus: &[Vec<S>], min_freq: usize) -> Vocabulary {
    let specials = special_tokens();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for stream in corpus {
        for t in stream {
            *counts.entry(t.as_ref()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_freq.max(1) && !specials.iter().any(|s| s == t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut tokens = specials;
    tokens.extend(kept.into_iter().map(|(t, _)| t.to_string()));
    Vocabulary::try_from(VocabFile { min_freq, tokens }).expect("tokens are unique")
}
