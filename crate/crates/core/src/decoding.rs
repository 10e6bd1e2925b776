//! Greedy and nucleus decoding, and turning placeholder output into text.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    detokenize, is_person_placeholder, Gender, ImageSequenceRecord, BOS, EOS, EOS_ID, LOCATION,
    PAD, UNK,
};
use crate::error::{Error, Result};
use crate::model::LogitSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodingMode {
    Greedy,
    Nucleus,
}

impl fmt::Display for DecodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodingMode::Greedy => "greedy",
            DecodingMode::Nucleus => "nucleus",
        })
    }
}

impl FromStr for DecodingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(DecodingMode::Greedy),
            "nucleus" => Ok(DecodingMode::Nucleus),
            other => Err(Error::Config(format!("unknown decoding mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub mode: DecodingMode,
    pub p: f64,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig {
            mode: DecodingMode::Nucleus,
            p: 0.1,
            max_new_tokens: 200,
            seed: 0,
        }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Config(format!(
                "nucleus p {} outside (0, 1]",
                self.p
            )));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::Config("max_new_tokens must be positive".into()));
        }
        Ok(())
    }
}

fn check_distribution(dist: &[f64]) -> Result<()> {
    if dist.is_empty() {
        return Err(Error::Numeric("empty distribution".into()));
    }
    if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Numeric(
            "distribution has negative or non-finite mass".into(),
        ));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Numeric(format!(
            "distribution sums to {total}, not 1"
        )));
    }
    Ok(())
}

/// The nucleus: ids sorted by descending probability (lower id first on
/// ties), cut after the smallest prefix whose mass reaches `p`, with
/// probabilities renormalized over that prefix.
pub fn nucleus(dist: &[f64], p: f64) -> Result<Vec<(usize, f64)>> {
    check_distribution(dist)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("nucleus p {p} outside (0, 1]")));
    }
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut cut = order.len();
    for (k, &id) in order.iter().enumerate() {
        mass += dist[id];
        if mass >= p {
            cut = k + 1;
            break;
        }
    }
    let kept = &order[..cut];
    let mass: f64 = kept.iter().map(|&i| dist[i]).sum();
    Ok(kept.iter().map(|&i| (i, dist[i] / mass)).collect())
}

pub fn nucleus_sample<R: Rng>(dist: &[f64], p: f64, rng: &mut R) -> Result<usize> {
    let kept = nucleus(dist, p)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(id, q) in &kept {
        acc += q;
        if u < acc {
            return Ok(id);
        }
    }
    Ok(kept.last().expect("nucleus is never empty").0)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Continues from `[BOS]` until `[EOS]` or the token limit. The returned
/// ids exclude `[EOS]`.
pub fn generate<M: LogitSource + ?Sized>(
    model: &M,
    seq: &ImageSequenceRecord,
    cfg: &DecodingConfig,
) -> Result<Vec<u32>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let limit = cfg.max_new_tokens.min(model.max_story_len());
    let mut out: Vec<u32> = Vec::new();
    while out.len() < limit {
        let logits = model.next_logits(seq, &out)?;
        let next = match cfg.mode {
            DecodingMode::Greedy => argmax(&softmax(&logits)?),
            DecodingMode::Nucleus => nucleus_sample(&softmax(&logits)?, cfg.p, &mut rng)?,
        } as u32;
        if next == EOS_ID {
            break;
        }
        out.push(next);
    }
    Ok(out)
}

/// Candidate names for realization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NamePool {
    pub male: Vec<String>,
    pub female: Vec<String>,
    pub locations: Vec<String>,
}

impl NamePool {
    /// A small built-in pool for display.
    pub fn builtin() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        NamePool {
            male: v(&["James", "Tom", "David", "Sam", "Leo", "Omar", "Ken", "Paul"]),
            female: v(&[
                "Mary", "Anna", "Lucy", "Nina", "Emma", "Sara", "Mia", "Ruth",
            ]),
            locations: v(&["Paris", "the park", "London", "the beach", "Boston"]),
        }
    }

    pub fn from_gender_map(names: &BTreeMap<Gender, Vec<String>>, locations: Vec<String>) -> Self {
        NamePool {
            male: names.get(&Gender::Male).cloned().unwrap_or_default(),
            female: names.get(&Gender::Female).cloned().unwrap_or_default(),
            locations,
        }
    }
}

/// Replaces placeholders with sampled names and detokenizes. Each distinct
/// person placeholder gets its own name drawn without replacement from its
/// gender's pool; every `[location]` in the story gets the same location.
pub fn realize<S: AsRef<str>, R: Rng>(
    tokens: &[S],
    names: &NamePool,
    rng: &mut R,
) -> Result<String> {
    let mut male: Vec<&String> = names.male.iter().collect();
    let mut female: Vec<&String> = names.female.iter().collect();
    male.shuffle(rng);
    female.shuffle(rng);
    let mut assigned: HashMap<String, String> = HashMap::new();
    let mut location: Option<String> = None;
    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    for tok in tokens {
        let t = tok.as_ref();
        if t == BOS || t == EOS || t == PAD {
            continue;
        }
        if t == UNK {
            out.push("unk".into());
            continue;
        }
        if t == LOCATION {
            if location.is_none() {
                let l = names.locations.choose(rng).ok_or_else(|| {
                    Error::Resource("no location names to realize [location]".into())
                })?;
                location = Some(l.clone());
            }
            out.push(location.clone().expect("set above"));
            continue;
        }
        let pool = if !is_person_placeholder(t) {
            None
        } else if t.starts_with("[male") {
            Some((&mut male, "male"))
        } else {
            Some((&mut female, "female"))
        };
        match pool {
            Some((pool, gender)) => {
                if !assigned.contains_key(t) {
                    let name = pool.pop().ok_or_else(|| {
                        Error::Resource(format!("not enough {gender} names to realize {t}"))
                    })?;
                    assigned.insert(t.to_string(), name.clone());
                }
                out.push(assigned[t].clone());
            }
            None => out.push(t.to_string()),
        }
    }
    Ok(detokenize(&out))
}

/// Line type of the generated-stories file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedStory {
    pub sequence_id: String,
    pub seed: u64,
    pub tokens: Vec<String>,
    pub text: String,
}
