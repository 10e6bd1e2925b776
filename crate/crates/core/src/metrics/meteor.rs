//! METEOR with exact and Porter-stem matching stages.
//!
//! Each stage matches as many unigrams as possible; the exact stage runs
//! first and the stem stage only sees what it left unmatched. Among the
//! alignments with those maximal stage counts the one with the fewest
//! chunks is used.

use std::collections::HashMap;

use super::{require_pairs, EvalPair, MetricConfig};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchStage {
    Exact,
    Stem,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// (hypothesis index, reference index, stage), ascending by hypothesis index.
    pub pairs: Vec<(usize, usize, MatchStage)>,
    pub chunks: usize,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }
}

/// Search nodes after which the exhaustive chunk search keeps its best so far.
const NODE_BUDGET: usize = 200_000;

fn stem_of(token: &str) -> String {
    if !token.is_empty() && token.chars().all(|c| c.is_ascii_alphabetic()) {
        porter_stemmer::stem(token)
    } else {
        token.to_string()
    }
}

struct Problem {
    hyp: Vec<usize>,
    refs: Vec<usize>,
    hyp_stem: Vec<usize>,
    ref_stem: Vec<usize>,
    exact_target: usize,
    stem_target: usize,
    /// exact matches each hypothesis type must receive
    type_quota: HashMap<usize, usize>,
    /// occurrences of `hyp[i]`'s type in `hyp[i..]`
    suffix_same: Vec<usize>,
}

fn intern(ids: &mut HashMap<String, usize>, s: String) -> usize {
    let next = ids.len();
    *ids.entry(s).or_insert(next)
}

fn counts(v: &[usize]) -> HashMap<usize, usize> {
    let mut c = HashMap::new();
    for &x in v {
        *c.entry(x).or_insert(0) += 1;
    }
    c
}

impl Problem {
    fn new(hyp: &[String], reference: &[String], use_stems: bool) -> Problem {
        let mut words = HashMap::new();
        let mut stems = HashMap::new();
        let h: Vec<usize> = hyp.iter().map(|t| intern(&mut words, t.clone())).collect();
        let r: Vec<usize> = reference
            .iter()
            .map(|t| intern(&mut words, t.clone()))
            .collect();
        // without stemming each word is its own stem class, so the stem
        // stage finds nothing the exact stage left over
        let stem = |t: &String| {
            if use_stems {
                stem_of(t)
            } else {
                format!("\u{0}{t}")
            }
        };
        let hs: Vec<usize> = hyp.iter().map(|t| intern(&mut stems, stem(t))).collect();
        let rs: Vec<usize> = reference
            .iter()
            .map(|t| intern(&mut stems, stem(t)))
            .collect();

        let (ch, cr) = (counts(&h), counts(&r));
        let mut type_quota = HashMap::new();
        let mut exact_target = 0;
        let mut residual_h: HashMap<usize, usize> = HashMap::new();
        let mut residual_r: HashMap<usize, usize> = HashMap::new();
        for (i, &t) in h.iter().enumerate() {
            if type_quota.contains_key(&t) {
                continue;
            }
            let q = ch[&t].min(cr.get(&t).copied().unwrap_or(0));
            type_quota.insert(t, q);
            exact_target += q;
            *residual_h.entry(hs[i]).or_insert(0) += ch[&t] - q;
        }
        let mut seen_r = std::collections::HashSet::new();
        for (j, &t) in r.iter().enumerate() {
            if seen_r.insert(t) {
                let q = cr[&t].min(ch.get(&t).copied().unwrap_or(0));
                *residual_r.entry(rs[j]).or_insert(0) += cr[&t] - q;
            }
        }
        let stem_target = residual_h
            .iter()
            .map(|(s, n)| (*n).min(residual_r.get(s).copied().unwrap_or(0)))
            .sum();
        let mut suffix_same = vec![0; h.len()];
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for i in (0..h.len()).rev() {
            let e = seen.entry(h[i]).or_insert(0);
            *e += 1;
            suffix_same[i] = *e;
        }
        Problem {
            hyp: h,
            refs: r,
            hyp_stem: hs,
            ref_stem: rs,
            exact_target,
            stem_target,
            type_quota,
            suffix_same,
        }
    }

    fn candidates(&self, i: usize, used: &[bool], prev: Option<usize>) -> Vec<(usize, MatchStage)> {
        let mut out = Vec::new();
        for (j, &t) in self.refs.iter().enumerate() {
            if used[j] {
                continue;
            }
            if t == self.hyp[i] {
                out.push((j, MatchStage::Exact));
            } else if self.ref_stem[j] == self.hyp_stem[i] {
                out.push((j, MatchStage::Stem));
            }
        }
        // continuing the current chunk is the most promising branch
        out.sort_by_key(|(j, s)| (Some(*j) != prev.map(|p| p + 1), *s == MatchStage::Stem, *j));
        out
    }
}

struct Search<'a> {
    p: &'a Problem,
    used: Vec<bool>,
    assign: Vec<Option<(usize, MatchStage)>>,
    exact_done: HashMap<usize, usize>,
    best: Option<Alignment>,
    nodes: usize,
}

impl Search<'_> {
    fn run(&mut self, i: usize, exact: usize, stem: usize, chunks: usize) {
        self.nodes += 1;
        if self.nodes > NODE_BUDGET {
            return;
        }
        if let Some(b) = &self.best {
            if chunks >= b.chunks {
                return;
            }
        }
        let p = self.p;
        let n = p.hyp.len();
        let needed = (p.exact_target - exact) + (p.stem_target - stem);
        if needed > n - i {
            return;
        }
        if i == n {
            if exact == p.exact_target && stem == p.stem_target {
                let pairs = self
                    .assign
                    .iter()
                    .enumerate()
                    .filter_map(|(h, a)| a.map(|(r, s)| (h, r, s)))
                    .collect();
                self.best = Some(Alignment { pairs, chunks });
            }
            return;
        }
        let t = p.hyp[i];
        let prev = if i > 0 {
            self.assign[i - 1].map(|(j, _)| j)
        } else {
            None
        };
        for (j, stage) in p.candidates(i, &self.used, prev) {
            let done = self.exact_done.get(&t).copied().unwrap_or(0);
            match stage {
                MatchStage::Exact if done >= p.type_quota[&t] => continue,
                MatchStage::Exact => {}
                MatchStage::Stem => {
                    if stem >= p.stem_target || p.type_quota[&t] - done > p.suffix_same[i] - 1 {
                        continue;
                    }
                }
            }
            let extends = prev.is_some_and(|pj| pj + 1 == j);
            self.used[j] = true;
            self.assign[i] = Some((j, stage));
            if stage == MatchStage::Exact {
                *self.exact_done.entry(t).or_insert(0) += 1;
                self.run(i + 1, exact + 1, stem, chunks + usize::from(!extends));
                *self.exact_done.get_mut(&t).expect("just inserted") -= 1;
            } else {
                self.run(i + 1, exact, stem + 1, chunks + usize::from(!extends));
            }
            self.used[j] = false;
            self.assign[i] = None;
        }
        // leave hypothesis token i unmatched, if its type can still fill its quota later
        let done = self.exact_done.get(&t).copied().unwrap_or(0);
        if p.type_quota[&t] - done < p.suffix_same[i] {
            self.run(i + 1, exact, stem, chunks);
        }
    }
}

fn greedy(p: &Problem) -> Alignment {
    let n = p.hyp.len();
    let mut used = vec![false; p.refs.len()];
    let mut assign: Vec<Option<(usize, MatchStage)>> = vec![None; n];
    for stage in [MatchStage::Exact, MatchStage::Stem] {
        let mut quota = p.type_quota.clone();
        for i in 0..n {
            if assign[i].is_some() {
                continue;
            }
            if stage == MatchStage::Exact && quota[&p.hyp[i]] == 0 {
                continue;
            }
            let prev = if i > 0 {
                assign[i - 1].map(|(j, _)| j)
            } else {
                None
            };
            let ok = |j: usize| {
                !used[j]
                    && match stage {
                        MatchStage::Exact => p.refs[j] == p.hyp[i],
                        MatchStage::Stem => p.refs[j] != p.hyp[i] && p.ref_stem[j] == p.hyp_stem[i],
                    }
            };
            let pick = prev
                .map(|pj| pj + 1)
                .filter(|&j| j < p.refs.len() && ok(j))
                .or_else(|| (0..p.refs.len()).find(|&j| ok(j)));
            if let Some(j) = pick {
                used[j] = true;
                assign[i] = Some((j, stage));
                if stage == MatchStage::Exact {
                    *quota.get_mut(&p.hyp[i]).expect("typed") -= 1;
                }
            }
        }
    }
    let pairs: Vec<(usize, usize, MatchStage)> = assign
        .iter()
        .enumerate()
        .filter_map(|(h, a)| a.map(|(r, s)| (h, r, s)))
        .collect();
    let chunks = count_chunks(&pairs);
    Alignment { pairs, chunks }
}

fn count_chunks(pairs: &[(usize, usize, MatchStage)]) -> usize {
    let mut chunks = 0;
    for (k, &(h, r, _)) in pairs.iter().enumerate() {
        let continues = k > 0 && {
            let (ph, pr, _) = pairs[k - 1];
            ph + 1 == h && pr + 1 == r
        };
        if !continues {
            chunks += 1;
        }
    }
    chunks
}

/// Maximal staged matching between one hypothesis and one reference with
/// the fewest chunks (exhaustive up to `meteor_exhaustive_limit` matches).
pub fn meteor_alignment(hyp: &[String], reference: &[String], cfg: &MetricConfig) -> Alignment {
    let p = Problem::new(hyp, reference, cfg.meteor_stem);
    let m = p.exact_target + p.stem_target;
    if m == 0 {
        return Alignment {
            pairs: vec![],
            chunks: 0,
        };
    }
    if m > cfg.meteor_exhaustive_limit {
        return greedy(&p);
    }
    let mut s = Search {
        p: &p,
        used: vec![false; p.refs.len()],
        assign: vec![None; p.hyp.len()],
        exact_done: HashMap::new(),
        best: None,
        nodes: 0,
    };
    s.run(0, 0, 0, 0);
    s.best.unwrap_or_else(|| greedy(&p))
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    matches: usize,
    chunks: usize,
    hyp_len: usize,
    ref_len: usize,
}

fn score(s: Stats, cfg: &MetricConfig) -> f64 {
    if s.matches == 0 {
        return 0.0;
    }
    let m = s.matches as f64;
    let p = m / s.hyp_len as f64;
    let r = m / s.ref_len as f64;
    let w = cfg.meteor_recall_weight;
    let f_mean = (1.0 + w) * p * r / (r + w * p);
    let penalty = cfg.meteor_gamma * (s.chunks as f64 / m).powf(cfg.meteor_exponent);
    f_mean * (1.0 - penalty)
}

/// Corpus METEOR with default constants.
pub fn meteor(pairs: &[EvalPair]) -> Result<f64> {
    meteor_with(pairs, &MetricConfig::default())
}

/// Each pair contributes the statistics of its best-scoring reference;
/// matches, chunks and lengths are summed over the corpus before the final
/// formula is applied.
pub fn meteor_with(pairs: &[EvalPair], cfg: &MetricConfig) -> Result<f64> {
    require_pairs(pairs)?;
    let mut total = Stats::default();
    for p in pairs {
        let best = p
            .references
            .iter()
            .map(|r| {
                let a = meteor_alignment(&p.hypothesis, r, cfg);
                Stats {
                    matches: a.matches(),
                    chunks: a.chunks,
                    hyp_len: p.hypothesis.len(),
                    ref_len: r.len(),
                }
            })
            // order-independent choice: best score, then more matches, fewer chunks, shorter reference
            .max_by(|a, b| {
                score(*a, cfg)
                    .total_cmp(&score(*b, cfg))
                    .then(a.matches.cmp(&b.matches))
                    .then(b.chunks.cmp(&a.chunks))
                    .then(b.ref_len.cmp(&a.ref_len))
            })
            .expect("references checked nonempty");
        total.matches += best.matches;
        total.chunks += best.chunks;
        total.hyp_len += best.hyp_len;
        total.ref_len += best.ref_len;
    }
    Ok(score(total, cfg))
}
