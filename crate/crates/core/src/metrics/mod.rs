//! Reference-based text metrics and multi-run aggregation.

mod aggregate;
mod bleu;
mod cider;
mod meteor;
mod rouge;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate_runs, mean_std, render_report, Band, MetricReport, MetricSummary};
pub use bleu::{bleu_corpus, bleu_with};
pub use cider::{cider, cider_with};
pub use meteor::{meteor, meteor_alignment, meteor_with, Alignment, MatchStage};
pub use rouge::{lcs_len, rouge_l, rouge_l_with};

use crate::corpus::tokenize;
use crate::error::{Error, Result};

/// One hypothesis with its references, as token lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPair {
    pub id: String,
    pub hypothesis: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl EvalPair {
    /// Tokenizes with the corpus tokenizer.
    pub fn from_text(id: impl Into<String>, hypothesis: &str, references: &[&str]) -> Self {
        EvalPair {
            id: id.into(),
            hypothesis: tokenize(hypothesis),
            references: references.iter().map(|r| tokenize(r)).collect(),
        }
    }
}

/// Line type of the metrics input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub id: String,
    pub hypothesis: String,
    pub references: Vec<String>,
}

pub fn parse_eval_pairs(text: &str, source: &str) -> Result<Vec<EvalPair>> {
    let records: Vec<(usize, EvalRecord)> = crate::jsonl::parse_numbered(text, source)?;
    records
        .into_iter()
        .map(|(line, r)| {
            if r.references.is_empty() {
                return Err(Error::parse(
                    source,
                    line,
                    format!("{}: no references", r.id),
                ));
            }
            let refs: Vec<&str> = r.references.iter().map(String::as_str).collect();
            Ok(EvalPair::from_text(r.id, &r.hypothesis, &refs))
        })
        .collect()
}

pub fn read_eval_pairs(path: &Path) -> Result<Vec<EvalPair>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_eval_pairs(&text, &path.display().to_string())
}

/// Metric constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub bleu_max_order: usize,
    /// Recall weight: F_mean = (1 + w)·P·R / (R + w·P); 9 gives 10PR/(R+9P).
    pub meteor_recall_weight: f64,
    pub meteor_gamma: f64,
    pub meteor_exponent: f64,
    pub meteor_stem: bool,
    /// Matched-unigram count up to which chunk minimization is exhaustive.
    pub meteor_exhaustive_limit: usize,
    pub rouge_beta: f64,
    pub cider_max_order: usize,
    pub cider_scale: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            bleu_max_order: 4,
            meteor_recall_weight: 9.0,
            meteor_gamma: 0.5,
            meteor_exponent: 3.0,
            meteor_stem: true,
            meteor_exhaustive_limit: 20,
            rouge_beta: 1.2,
            cider_max_order: 4,
            cider_scale: 10.0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.meteor_recall_weight,
            self.meteor_gamma,
            self.meteor_exponent,
            self.rouge_beta,
            self.cider_scale,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || self.bleu_max_order == 0
            || self.cider_max_order == 0
        {
            return Err(Error::Config("metric constants must be positive".into()));
        }
        Ok(())
    }
}

/// All reported scores for one corpus, each in its natural range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub bleu: Vec<f64>,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: Option<f64>,
}

impl CorpusScores {
    /// Flat name → value map with names `B-1`..`B-n`, `METEOR`, `ROUGE-L`, `CIDEr`.
    pub fn named(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (i, b) in self.bleu.iter().enumerate() {
            out.insert(format!("B-{}", i + 1), *b);
        }
        out.insert("METEOR".into(), self.meteor);
        out.insert("ROUGE-L".into(), self.rouge_l);
        if let Some(c) = self.cider {
            out.insert("CIDEr".into(), c);
        }
        out
    }
}

/// Every metric on one corpus. CIDEr is left out for single-pair corpora,
/// where its document frequencies are undefined.
pub fn score_corpus(pairs: &[EvalPair], cfg: &MetricConfig) -> Result<CorpusScores> {
    cfg.validate()?;
    let bleu = (1..=cfg.bleu_max_order)
        .map(|n| bleu_with(pairs, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorpusScores {
        bleu,
        meteor: meteor_with(pairs, cfg)?,
        rouge_l: rouge_l_with(pairs, cfg.rouge_beta)?,
        cider: if pairs.len() >= 2 {
            Some(cider_with(pairs, cfg)?)
        } else {
            None
        },
    })
}

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut out = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w).or_insert(0) += 1;
    }
    out
}

pub(crate) fn require_pairs(pairs: &[EvalPair]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Input("empty evaluation corpus".into()));
    }
    if let Some(p) = pairs.iter().find(|p| p.references.is_empty()) {
        return Err(Error::Input(format!("{}: no references", p.id)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_input_parsing() {
        let text = r#"{"id":"a","hypothesis":"The cat.","references":["the cat .","a cat"]}

{"id":"b","hypothesis":"x","references":["y"]}
"#;
        let pairs = parse_eval_pairs(text, "in.jsonl").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].hypothesis, vec!["the", "cat", "."]);
        let err = parse_eval_pairs(r#"{"id":"a","hypothesis":"x","references":[]}"#, "in.jsonl")
            .unwrap_err();
        assert!(err.to_string().contains("in.jsonl:1"));
        assert!(parse_eval_pairs(r#"{"id":"a","hypothesis":"x"}"#, "f").is_err());
    }

    #[test]
    fn ngram_counting() {
        let t: Vec<String> = "a b a b".split(' ').map(String::from).collect();
        let c = ngram_counts(&t, 2);
        assert_eq!(c.len(), 2);
        assert_eq!(c[&t[0..2]], 2);
        assert!(ngram_counts(&t, 5).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(MetricConfig::default().validate().is_ok());
        let c = MetricConfig {
            rouge_beta: 0.0,
            ..MetricConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
