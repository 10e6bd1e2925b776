use std::collections::HashMap;

use proptest::prelude::*;

use vwp_core::metrics::{
    bleu_corpus, cider, meteor, meteor_alignment, rouge_l, EvalPair, MetricConfig,
};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn pair(h: &str, refs: &[&str]) -> EvalPair {
    EvalPair {
        id: "p".into(),
        hypothesis: toks(h),
        references: refs.iter().map(|r| toks(r)).collect(),
    }
}

// --- METEOR: enumerate every partial injective alignment -------------------

fn stem(t: &str) -> String {
    if t.chars().all(|c| c.is_ascii_alphabetic()) && !t.is_empty() {
        porter_stemmer::stem(t)
    } else {
        t.to_string()
    }
}

/// (matches, chunks) of the best alignment: lexicographically most exact
/// matches, then most stem matches, then fewest chunks.
fn brute_alignment(h: &[String], r: &[String]) -> (usize, usize) {
    let mut best: Option<(usize, usize, usize)> = None; // (exact, stem, chunks)
    let mut assign = vec![None; h.len()];
    fn rec(
        i: usize,
        h: &[String],
        r: &[String],
        used: &mut Vec<bool>,
        assign: &mut Vec<Option<usize>>,
        best: &mut Option<(usize, usize, usize)>,
    ) {
        if i == h.len() {
            let (mut exact, mut stemmed, mut chunks) = (0, 0, 0);
            for k in 0..h.len() {
                if let Some(j) = assign[k] {
                    if h[k] == r[j] {
                        exact += 1;
                    } else {
                        stemmed += 1;
                    }
                    let continues = k > 0 && j > 0 && assign[k - 1] == Some(j - 1);
                    if !continues {
                        chunks += 1;
                    }
                }
            }
            let better = match best {
                None => true,
                Some((e, s, c)) => {
                    (exact, stemmed, std::cmp::Reverse(chunks)) > (*e, *s, std::cmp::Reverse(*c))
                }
            };
            if better {
                *best = Some((exact, stemmed, chunks));
            }
            return;
        }
        rec(i + 1, h, r, used, assign, best);
        for j in 0..r.len() {
            if used[j] {
                continue;
            }
            if h[i] == r[j] || stem(&h[i]) == stem(&r[j]) {
                used[j] = true;
                assign[i] = Some(j);
                rec(i + 1, h, r, used, assign, best);
                assign[i] = None;
                used[j] = false;
            }
        }
    }
    rec(0, h, r, &mut vec![false; r.len()], &mut assign, &mut best);
    let (e, s, c) = best.unwrap();
    (e + s, c)
}

fn meteor_formula(m: usize, chunks: usize, hl: usize, rl: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let (m, c) = (m as f64, chunks as f64);
    let p = m / hl as f64;
    let r = m / rl as f64;
    let f = 10.0 * p * r / (r + 9.0 * p);
    f * (1.0 - 0.5 * (c / m).powi(3))
}

const WORDS: &[&str] = &[
    "the", "cat", "cats", "run", "runs", "running", "a", "dog", ".",
];

fn sentence(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(WORDS), 0..=max)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn meteor_alignment_matches_enumeration(h in sentence(6), r in sentence(6)) {
        let a = meteor_alignment(&h, &r, &MetricConfig::default());
        let (m, c) = brute_alignment(&h, &r);
        prop_assert_eq!((a.matches(), a.chunks), (m, c));
    }

    #[test]
    fn single_pair_meteor_matches_formula(h in sentence(6), r in sentence(6)) {
        prop_assume!(!h.is_empty() && !r.is_empty());
        let got = meteor(&[EvalPair { id: "x".into(), hypothesis: h.clone(), references: vec![r.clone()] }]).unwrap();
        let (m, c) = brute_alignment(&h, &r);
        let want = meteor_formula(m, c, h.len(), r.len());
        prop_assert!((got - want).abs() < 1e-9, "{} vs {}", got, want);
    }
}

// --- CIDEr: straightforward TF-IDF over string keys ------------------------

fn brute_cider(pairs: &[EvalPair]) -> f64 {
    let grams = |t: &[String], n: usize| -> HashMap<String, f64> {
        let mut m = HashMap::new();
        if t.len() >= n {
            for i in 0..=t.len() - n {
                *m.entry(t[i..i + n].join("\u{1}")).or_insert(0.0) += 1.0;
            }
        }
        m
    };
    let size = pairs.len() as f64;
    let mut total = 0.0;
    for n in 1..=4 {
        let mut df: HashMap<String, f64> = HashMap::new();
        for p in pairs {
            let mut seen = std::collections::HashSet::new();
            for r in &p.references {
                for g in grams(r, n).into_keys() {
                    seen.insert(g);
                }
            }
            for g in seen {
                *df.entry(g).or_insert(0.0) += 1.0;
            }
        }
        let weigh = |m: HashMap<String, f64>| -> HashMap<String, f64> {
            m.into_iter()
                .map(|(g, c)| {
                    let idf = (size / (1.0 + df.get(&g).copied().unwrap_or(0.0)))
                        .ln()
                        .max(0.0);
                    (g, c * idf)
                })
                .collect()
        };
        let mut order_sum = 0.0;
        for p in pairs {
            let hv = weigh(grams(&p.hypothesis, n));
            let mut s = 0.0;
            for r in &p.references {
                let rv = weigh(grams(r, n));
                let dot: f64 = hv
                    .iter()
                    .map(|(g, x)| x * rv.get(g).copied().unwrap_or(0.0))
                    .sum();
                let nh: f64 = hv.values().map(|x| x * x).sum::<f64>().sqrt();
                let nr: f64 = rv.values().map(|x| x * x).sum::<f64>().sqrt();
                s += if nh > 0.0 && nr > 0.0 {
                    dot / (nh * nr)
                } else {
                    0.0
                };
            }
            order_sum += s / p.references.len() as f64;
        }
        total += order_sum / size;
    }
    10.0 * total / 4.0
}

fn corpus(min: usize, max: usize) -> impl Strategy<Value = Vec<EvalPair>> {
    prop::collection::vec(
        (sentence(8), prop::collection::vec(sentence(8), 1..4)),
        min..=max,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (h, refs))| EvalPair {
                id: i.to_string(),
                hypothesis: h,
                references: refs,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cider_matches_brute_force(pairs in corpus(2, 6)) {
        let got = cider(&pairs).unwrap();
        let want = brute_cider(&pairs);
        prop_assert!((got - want).abs() < 1e-9, "{} vs {}", got, want);
        prop_assert!((0.0..=10.0 + 1e-12).contains(&got));
    }

    #[test]
    fn metrics_ignore_reference_order(pairs in corpus(2, 5)) {
        prop_assume!(pairs.iter().any(|p| !p.hypothesis.is_empty()));
        let reversed: Vec<EvalPair> = pairs.iter().map(|p| {
            let mut q = p.clone();
            q.references.reverse();
            q
        }).collect();
        for n in 1..=4 {
            prop_assert_eq!(bleu_corpus(&pairs, n).unwrap(), bleu_corpus(&reversed, n).unwrap());
        }
        prop_assert_eq!(meteor(&pairs).unwrap(), meteor(&reversed).unwrap());
        prop_assert_eq!(rouge_l(&pairs).unwrap(), rouge_l(&reversed).unwrap());
        prop_assert!((cider(&pairs).unwrap() - cider(&reversed).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn scores_stay_in_range(pairs in corpus(2, 5)) {
        prop_assume!(pairs.iter().any(|p| !p.hypothesis.is_empty()));
        for n in 1..=4 {
            let b = bleu_corpus(&pairs, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
        }
        prop_assert!((0.0..=1.0).contains(&meteor(&pairs).unwrap()));
        prop_assert!((0.0..=1.0).contains(&rouge_l(&pairs).unwrap()));
    }

    // "matched" means counted after clipping: deleting a surplus copy that
    // clipping already discarded shortens the hypothesis without losing a
    // match and can raise B-1 (e.g. "the run run the" against "run")
    #[test]
    fn deleting_a_matched_token_never_raises_bleu1(h in sentence(8), r in sentence(8), k in 0usize..8) {
        let p = EvalPair { id: "x".into(), hypothesis: h.clone(), references: vec![r.clone()] };
        prop_assume!(h.len() >= 2);
        let i = k % h.len();
        let count = |v: &[String]| v.iter().filter(|t| **t == h[i]).count();
        prop_assume!(count(&r) >= count(&h));
        let mut shorter = h.clone();
        shorter.remove(i);
        let q = EvalPair { id: "x".into(), hypothesis: shorter, references: vec![r] };
        prop_assert!(bleu_corpus(&[q], 1).unwrap() <= bleu_corpus(&[p], 1).unwrap() + 1e-15);
    }
}

// --- worked examples and self-evaluation ------------------------------------

#[test]
fn hand_computed_examples() {
    assert_eq!(
        bleu_corpus(&[pair("the the the the", &["the cat"])], 1).unwrap(),
        0.25
    );
    let m = meteor(&[pair("the cat sat", &["the cat sat"])]).unwrap();
    assert!((m - (1.0 - 0.5 / 27.0)).abs() < 1e-9);
    assert!((meteor(&[pair("the cat", &["cat the"])]).unwrap() - 0.5).abs() < 1e-9);
    let r = rouge_l(&[pair("a b c d", &["a c d"])]).unwrap();
    assert!((r - 2.44 * 0.75 / (1.0 + 1.44 * 0.75)).abs() < 1e-9);
}

fn fixture_corpus() -> Vec<EvalPair> {
    let stories = [
        "[male0] went to the park with his dog .",
        "the family gathered for a big dinner .",
        "[female0] opened the gift and smiled .",
        "they walked along the beach at sunset .",
        "the team celebrated after the game .",
        "[male1] cooked pancakes for everyone .",
        "the children played in the snow all day .",
        "we visited the old castle on the hill .",
        "[female1] painted a picture of the lake .",
        "the band played music late into the night .",
        "grandma told stories by the fire .",
        "the city lights looked beautiful from above .",
        "[male0] and [female0] danced at the wedding .",
        "the puppy chased a ball across the yard .",
        "everyone cheered when the cake arrived .",
        "the hikers reached the top of the mountain .",
        "[location] was crowded with tourists that day .",
        "the students presented their science project .",
        "a storm rolled in over the fields .",
        "the friends said goodbye at the station .",
    ];
    stories.iter().map(|s| pair(s, &[s])).collect()
}

#[test]
fn self_evaluation_on_twenty_pairs() {
    let pairs = fixture_corpus();
    assert_eq!(pairs.len(), 20);
    for n in 1..=4 {
        assert!((bleu_corpus(&pairs, n).unwrap() - 1.0).abs() < 1e-12);
    }
    assert!((rouge_l(&pairs).unwrap() - 1.0).abs() < 1e-12);
    let total: usize = pairs.iter().map(|p| p.hypothesis.len()).sum();
    let expected = 1.0 - 0.5 * (20.0 / total as f64).powi(3);
    let got = meteor(&pairs).unwrap();
    assert!((got - expected).abs() < 1e-12 && got < 1.0);
    assert!((cider(&pairs).unwrap() - brute_cider(&pairs)).abs() < 1e-9);
}

#[test]
fn two_image_cider_oracle() {
    let pairs = vec![
        pair(
            "a man rides a horse",
            &["a man rides a brown horse", "a person on a horse"],
        ),
        pair("two dogs play", &["two dogs play in the grass"]),
    ];
    assert!((cider(&pairs).unwrap() - brute_cider(&pairs)).abs() < 1e-9);
    let three = vec![
        pair(
            "a man rides a horse",
            &["a man rides a brown horse", "a person on a horse"],
        ),
        pair("two dogs play", &["two dogs play in the grass"]),
        pair("a cat sleeps", &["the cat sleeps on a mat"]),
    ];
    let c = cider(&three).unwrap();
    assert!(c > 0.0);
    assert!((c - brute_cider(&three)).abs() < 1e-9);
}
