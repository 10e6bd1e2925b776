use std::collections::{BTreeMap, BTreeSet};

use super::{ngram_counts, require_pairs, EvalPair, MetricConfig};
use crate::error::{Error, Result};

type Vector<'a> = BTreeMap<&'a [String], f64>;

fn tfidf<'a>(tokens: &'a [String], n: usize, idf: &dyn Fn(&[String]) -> f64) -> Vector<'a> {
    ngram_counts(tokens, n)
        .into_iter()
        .map(|(g, c)| (g, c as f64 * idf(g)))
        .collect()
}

fn cosine(a: &Vector, b: &Vector) -> f64 {
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// CIDEr with default constants (orders 1–4, scale 10).
pub fn cider(pairs: &[EvalPair]) -> Result<f64> {
    cider_with(pairs, &MetricConfig::default())
}

/// Plain CIDEr: IDF = max(0, ln(|corpus| / (1 + df))) where df counts
/// pairs whose references contain the n-gram; per order the mean over
/// references of the TF-IDF cosine, averaged over pairs and orders, × scale.
pub fn cider_with(pairs: &[EvalPair], cfg: &MetricConfig) -> Result<f64> {
    require_pairs(pairs)?;
    if pairs.len() < 2 {
        return Err(Error::Input(
            "CIDEr needs at least two evaluation pairs".into(),
        ));
    }
    let corpus = pairs.len() as f64;
    let mut per_order = 0.0;
    for n in 1..=cfg.cider_max_order {
        let mut df: BTreeMap<&[String], usize> = BTreeMap::new();
        for p in pairs {
            let grams: BTreeSet<&[String]> = p
                .references
                .iter()
                .flat_map(|r| ngram_counts(r, n).into_keys())
                .collect();
            for g in grams {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        let idf = |g: &[String]| {
            let d = df.get(g).copied().unwrap_or(0) as f64;
            (corpus / (1.0 + d)).ln().max(0.0)
        };
        let mut sum = 0.0;
        for p in pairs {
            let h = tfidf(&p.hypothesis, n, &idf);
            let s: f64 = p
                .references
                .iter()
                .map(|r| cosine(&h, &tfidf(r, n, &idf)))
                .sum();
            sum += s / p.references.len() as f64;
        }
        per_order += sum / corpus;
    }
    Ok(cfg.cider_scale * per_order / cfg.cider_max_order as f64)
}
