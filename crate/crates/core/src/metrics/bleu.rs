use std::collections::BTreeMap;

use super::{ngram_counts, require_pairs, EvalPair};
use crate::error::{Error, Result};

/// Cumulative corpus BLEU-`n`: geometric mean of clipped precisions for
/// orders `1..=n` times the brevity penalty, without smoothing.
pub fn bleu_corpus(pairs: &[EvalPair], n: usize) -> Result<f64> {
    bleu_with(pairs, n)
}

pub fn bleu_with(pairs: &[EvalPair], max_order: usize) -> Result<f64> {
    require_pairs(pairs)?;
    if max_order == 0 {
        return Err(Error::Config("BLEU order must be at least 1".into()));
    }
    let mut matched = vec![0usize; max_order];
    let mut total = vec![0usize; max_order];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for p in pairs {
        let c = p.hypothesis.len();
        hyp_len += c;
        // closest reference length, shorter one on ties
        ref_len += p
            .references
            .iter()
            .map(Vec::len)
            .min_by_key(|&r| (r.abs_diff(c), r))
            .unwrap_or(0);
        for n in 1..=max_order {
            let hyp = ngram_counts(&p.hypothesis, n);
            let mut max_ref: BTreeMap<&[String], usize> = BTreeMap::new();
            for r in &p.references {
                for (g, k) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(k);
                }
            }
            for (g, k) in &hyp {
                matched[n - 1] += (*k).min(max_ref.get(g).copied().unwrap_or(0));
                total[n - 1] += k;
            }
        }
    }
    if hyp_len == 0 {
        return Err(Error::Input("all hypotheses are empty".into()));
    }
    let mut log_sum = 0.0;
    for n in 0..max_order {
        if matched[n] == 0 {
            return Ok(0.0);
        }
        log_sum += (matched[n] as f64 / total[n] as f64).ln();
    }
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(bp * (log_sum / max_order as f64).exp())
}
