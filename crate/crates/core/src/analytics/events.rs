use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::SrlEvent;

/// Argument roles tracked per event.
pub const ARG_ROLES: [&str; 4] = ["arg0", "arg1", "arg2", "arg-loc"];

/// Columns of the similarity report, in display order.
pub const SIMILARITY_ROLES: [&str; 7] = [
    "PRD",
    "Characters",
    "Arguments",
    "arg0",
    "arg1",
    "arg2",
    "arg-loc",
];

/// Events of one story plus its main characters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SrlStory {
    pub predicates: Vec<String>,
    pub args: BTreeMap<String, BTreeSet<String>>,
    pub characters: BTreeSet<String>,
}

impl SrlStory {
    pub fn new(events: &[SrlEvent], characters: impl IntoIterator<Item = String>) -> Self {
        let mut args: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for e in events {
            for (role, toks) in &e.args {
                args.entry(role.to_lowercase())
                    .or_default()
                    .extend(toks.iter().map(|t| t.to_lowercase()));
            }
        }
        SrlStory {
            predicates: events.iter().map(|e| e.predicate.to_lowercase()).collect(),
            args,
            characters: characters.into_iter().map(|c| c.to_lowercase()).collect(),
        }
    }

    /// Token set compared under `role` (one of [`SIMILARITY_ROLES`]).
    pub fn role_set(&self, role: &str) -> BTreeSet<String> {
        match role {
            "PRD" => self.predicates.iter().cloned().collect(),
            "Characters" => self.characters.clone(),
            "Arguments" => ARG_ROLES
                .iter()
                .filter_map(|r| self.args.get(*r))
                .flatten()
                .cloned()
                .collect(),
            r => self.args.get(r).cloned().unwrap_or_default(),
        }
    }
}

/// |A∩B| / |A∪B|, 0 when both are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    /// Sequences with at least two stories.
    pub sequences: usize,
    /// Sequences skipped for having fewer than two stories.
    pub skipped: usize,
    pub by_role: BTreeMap<String, f64>,
}

/// Per role: mean over sequences of the mean pairwise Jaccard similarity
/// between that sequence's stories.
pub fn jaccard_similarity(groups: &[Vec<SrlStory>]) -> SimilarityReport {
    let mut sums: BTreeMap<String, f64> = SIMILARITY_ROLES
        .iter()
        .map(|r| (r.to_string(), 0.0))
        .collect();
    let mut sequences = 0;
    let mut skipped = 0;
    for stories in groups {
        if stories.len() < 2 {
            skipped += 1;
            continue;
        }
        sequences += 1;
        for role in SIMILARITY_ROLES {
            let sets: Vec<BTreeSet<String>> = stories.iter().map(|s| s.role_set(role)).collect();
            let mut total = 0.0;
            let mut pairs = 0;
            for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    total += jaccard(&sets[i], &sets[j]);
                    pairs += 1;
                }
            }
            *sums.get_mut(role).expect("role present") += total / pairs as f64;
        }
    }
    let by_role = sums
        .into_iter()
        .map(|(r, s)| {
            (
                r,
                if sequences == 0 {
                    0.0
                } else {
                    s / sequences as f64
                },
            )
        })
        .collect();
    SimilarityReport {
        sequences,
        skipped,
        by_role,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDiversity {
    pub vocab_size: usize,
    pub unique_verbs: usize,
    pub verb_vocab_pct: f64,
    pub verb_token_pct: f64,
    pub diverse_verb_pct: f64,
}

/// Lemmas ranked by frequency, lexicographic within equal counts.
fn ranked<'a>(counts: &BTreeMap<&'a str, usize>) -> Vec<(&'a str, usize)> {
    let mut v: Vec<(&'a str, usize)> = counts.iter().map(|(k, c)| (*k, *c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v
}

/// Vocabulary and verb statistics. Tokens are compared lowercased; verbs
/// are predicate lemmas. Diverse verbs are occurrences whose lemma is not
/// among the five most frequent.
pub fn event_diversity<S: AsRef<str>>(
    stories: &[SrlStory],
    token_streams: &[Vec<S>],
) -> EventDiversity {
    let vocab: BTreeSet<String> = token_streams
        .iter()
        .flatten()
        .map(|t| t.as_ref().to_lowercase())
        .collect();
    let n_tokens: usize = token_streams.iter().map(Vec::len).sum();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in stories {
        for p in &s.predicates {
            *counts.entry(p.as_str()).or_insert(0) += 1;
        }
    }
    let occurrences: usize = counts.values().sum();
    let top: usize = ranked(&counts).iter().take(5).map(|(_, c)| c).sum();
    let pct = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    EventDiversity {
        vocab_size: vocab.len(),
        unique_verbs: counts.len(),
        verb_vocab_pct: pct(counts.len(), vocab.len()),
        verb_token_pct: pct(counts.len(), n_tokens),
        diverse_verb_pct: pct(occurrences - top, occurrences),
    }
}

/// Distinct / total predicate n-grams for n = 1, 2, 3, counted within each
/// story. 0 when there are no n-grams of that order.
pub fn predicate_ngram_diversity(stories: &[SrlStory]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let n = k + 1;
        let mut distinct: BTreeSet<&[String]> = BTreeSet::new();
        let mut total = 0usize;
        for s in stories {
            for w in s.predicates.windows(n) {
                distinct.insert(w);
                total += 1;
            }
        }
        *slot = if total == 0 {
            0.0
        } else {
            distinct.len() as f64 / total as f64
        };
    }
    out
}
