use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;

use vwp_core::analytics::{
    jaccard, plan_review_sample, predicate_ngram_diversity, score_coherence, EntityGridModel,
    EntityRoleGrid, Role, SrlStory,
};

fn role() -> impl Strategy<Value = Role> {
    prop::sample::select(Role::ALL.to_vec())
}

fn grid_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = EntityRoleGrid> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::collection::vec(role(), c), r).prop_map(move |rows| {
            EntityRoleGrid {
                entities: (0..c).map(|i| format!("e{i}")).collect(),
                rows,
            }
        })
    })
}

/// Straightforward count table for history 1 built from explicit column walks.
fn bigram_counts(grids: &[EntityRoleGrid]) -> HashMap<(Role, Role), u64> {
    let mut m = HashMap::new();
    for g in grids {
        for e in 0..g.entities.len() {
            let mut prev = Role::Absent;
            for row in &g.rows {
                *m.entry((prev, row[e])).or_insert(0) += 1;
                prev = row[e];
            }
        }
    }
    m
}

/// LL of the corpus under an explicit h=1 table `table[prev][next]`.
fn corpus_ll(grids: &[EntityRoleGrid], table: &[[f64; 4]; 4]) -> f64 {
    let idx = |r: Role| Role::ALL.iter().position(|x| *x == r).unwrap();
    let mut ll = 0.0;
    for ((p, n), c) in bigram_counts(grids) {
        ll += c as f64 * table[idx(p)][idx(n)].ln();
    }
    ll
}

/// All distributions over 4 outcomes on a grid of step 1/k.
fn simplex(k: usize) -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    for a in 0..=k {
        for b in 0..=k - a {
            for c in 0..=k - a - b {
                let d = k - a - b - c;
                out.push([a, b, c, d].map(|x| x as f64 / k as f64));
            }
        }
    }
    out
}

#[test]
fn self_trained_model_maximizes_likelihood_over_enumerated_tables() {
    use Role::*;
    // two entities, three sentences
    let corpus = vec![EntityRoleGrid::new(
        vec!["a".into(), "b".into()],
        vec![
            vec![Subject, Absent],
            vec![Subject, Object],
            vec![Other, Subject],
        ],
    )
    .unwrap()];
    let mle = EntityGridModel::train(&corpus, 1, 0.0).unwrap();
    let best: f64 = corpus
        .iter()
        .map(|g| score_coherence(&mle, g).unwrap().ll)
        .sum();
    // contexts are independent, so the corpus LL separates per context row
    let counts = bigram_counts(&corpus);
    let idx = |r: Role| Role::ALL.iter().position(|x| *x == r).unwrap();
    let mut enumerated_best = 0.0;
    for prev in Role::ALL {
        let row_best = simplex(10)
            .iter()
            .map(|dist| {
                Role::ALL
                    .iter()
                    .map(|n| {
                        let c = counts.get(&(prev, *n)).copied().unwrap_or(0) as f64;
                        if c == 0.0 {
                            0.0
                        } else {
                            c * dist[idx(*n)].ln()
                        }
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        enumerated_best += row_best;
    }
    assert!(
        best >= enumerated_best - 1e-12,
        "{best} < {enumerated_best}"
    );
    // and the MLE equals the exact count-normalized table's likelihood
    let mut table = [[0.25; 4]; 4];
    for p in Role::ALL {
        let tot: u64 = Role::ALL
            .iter()
            .map(|n| counts.get(&(p, *n)).copied().unwrap_or(0))
            .sum();
        if tot > 0 {
            for n in Role::ALL {
                table[idx(p)][idx(n)] =
                    counts.get(&(p, n)).copied().unwrap_or(0) as f64 / tot as f64;
            }
        }
    }
    assert!((corpus_ll(&corpus, &table) - best).abs() < 1e-12);
}

#[test]
fn self_trained_beats_uniform_on_two_by_two() {
    for cells in 0..256u32 {
        let r = |k: u32| Role::ALL[((cells >> (2 * k)) & 3) as usize];
        let g = EntityRoleGrid::new(
            vec!["a".into(), "b".into()],
            vec![vec![r(0), r(1)], vec![r(2), r(3)]],
        )
        .unwrap();
        let own = EntityGridModel::train(&[g.clone()], 1, 0.1).unwrap();
        let uniform = EntityGridModel::empty(1, 0.1).unwrap();
        let a = score_coherence(&own, &g).unwrap().ll;
        let b = score_coherence(&uniform, &g).unwrap().ll;
        assert!(a >= b - 1e-12, "grid {cells}: {a} < {b}");
    }
}

proptest! {
    #[test]
    fn smoothed_probabilities_match_counts(grids in prop::collection::vec(grid_strategy(5, 3), 1..4), alpha in 0.01f64..2.0) {
        let m = EntityGridModel::train(&grids, 1, alpha).unwrap();
        let counts = bigram_counts(&grids);
        for p in Role::ALL {
            let tot: u64 = Role::ALL.iter().map(|n| counts.get(&(p, *n)).copied().unwrap_or(0)).sum();
            let mut sum = 0.0;
            for n in Role::ALL {
                let c = counts.get(&(p, n)).copied().unwrap_or(0);
                let expect = (c as f64 + alpha) / (tot as f64 + 4.0 * alpha);
                prop_assert!((m.prob(&[p], n) - expect).abs() < 1e-12);
                sum += m.prob(&[p], n);
            }
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn higher_order_contexts_are_normalized(grids in prop::collection::vec(grid_strategy(6, 3), 1..3), h in 0usize..4) {
        let m = EntityGridModel::train(&grids, h, 0.1).unwrap();
        for g in &grids {
            for e in 0..g.entities.len() {
                for i in 0..g.rows.len() {
                    let ctx: Vec<Role> = (0..h).map(|k| {
                        let back = h - k;
                        if i >= back { g.rows[i - back][e] } else { Role::Absent }
                    }).collect();
                    let s: f64 = Role::ALL.iter().map(|r| m.prob(&ctx, *r)).sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
            let c = score_coherence(&m, g).unwrap();
            prop_assert!((c.avg_ll * (g.rows.len() * g.entities.len()) as f64 - c.ll).abs() < 1e-9);
        }
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded(a in prop::collection::btree_set(0u8..10, 0..8), b in prop::collection::btree_set(0u8..10, 0..8)) {
        let j = jaccard(&a, &b);
        prop_assert_eq!(j, jaccard(&b, &a));
        prop_assert!((0.0..=1.0).contains(&j));
        if !a.is_empty() {
            prop_assert_eq!(jaccard(&a, &a), 1.0);
        }
        let inter: BTreeSet<_> = a.intersection(&b).collect();
        let union: BTreeSet<_> = a.union(&b).collect();
        if !union.is_empty() {
            prop_assert_eq!(j, inter.len() as f64 / union.len() as f64);
        }
    }

    #[test]
    fn duplicating_stories_never_raises_uniqueness(stories in prop::collection::vec(prop::collection::vec(0u8..4, 0..6), 1..5)) {
        let srl: Vec<SrlStory> = stories.iter().map(|ps| SrlStory {
            predicates: ps.iter().map(|p| format!("v{p}")).collect(),
            ..SrlStory::default()
        }).collect();
        let base = predicate_ngram_diversity(&srl);
        let mut doubled = srl.clone();
        doubled.extend(srl.iter().cloned());
        let dup = predicate_ngram_diversity(&doubled);
        for n in 0..3 {
            prop_assert!((0.0..=1.0).contains(&base[n]));
            prop_assert!(dup[n] <= base[n]);
        }
    }

    #[test]
    fn review_sample_is_monotone(n in 10u64..1_000_000) {
        prop_assert!(plan_review_sample(n) <= plan_review_sample(n + 1));
        prop_assert!(plan_review_sample(n) <= n);
    }
}
