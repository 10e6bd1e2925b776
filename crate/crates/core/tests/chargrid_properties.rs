use proptest::prelude::*;

use vwp_core::chargrid::{
    compute_entity_grid, compute_grid, compute_object_grid, flatten_pad, from_csv, shade_buckets,
    to_csv, M_MAX, N_MAX,
};
use vwp_core::corpus::{CharacterRecord, Gender, ImageRecord, ImageSequenceRecord, ObjectRecord};
use vwp_core::Error;

fn record(images: Vec<Vec<f64>>, chars: Vec<Vec<f64>>, objs: Vec<Vec<f64>>) -> ImageSequenceRecord {
    ImageSequenceRecord {
        id: "fx".into(),
        images: images
            .into_iter()
            .enumerate()
            .map(|(i, f)| ImageRecord {
                image_id: format!("img{i}"),
                global_feat: f,
            })
            .collect(),
        characters: chars
            .into_iter()
            .enumerate()
            .map(|(i, f)| CharacterRecord {
                char_id: format!("ch{i}"),
                gender: Gender::Unknown,
                instances: vec![],
                representative_feat: f,
            })
            .collect(),
        objects: Some(
            objs.into_iter()
                .enumerate()
                .map(|(i, f)| ObjectRecord {
                    object_id: format!("ob{i}"),
                    feat: f,
                })
                .collect(),
        ),
        stories: vec![],
    }
}

fn brute(images: &[Vec<f64>], cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; cols.len()]; images.len()];
    for a in 0..images.len() {
        for b in 0..cols.len() {
            let mut s = 0.0;
            for d in 0..images[a].len() {
                s += images[a][d] * cols[b][d];
            }
            out[a][b] = s;
        }
    }
    out
}

fn vecs(
    count: std::ops::RangeInclusive<usize>,
    dim: usize,
) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), count)
}

fn fixture() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (1usize..8).prop_flat_map(|d| (vecs(1..=N_MAX, d), vecs(0..=M_MAX, d), vecs(0..=4, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn grid_equals_brute_force((imgs, chars, objs) in fixture()) {
        let seq = record(imgs.clone(), chars.clone(), objs.clone());
        let g = compute_grid(&seq).unwrap();
        let want = brute(&imgs, &chars);
        prop_assert_eq!((g.rows(), g.cols()), (imgs.len(), chars.len()));
        for a in 0..g.rows() {
            prop_assert_eq!(g.row(a), &want[a][..]);
        }
        let og = compute_object_grid(&seq).unwrap();
        let want = brute(&imgs, &objs);
        for a in 0..og.rows() {
            prop_assert_eq!(og.row(a), &want[a][..]);
        }
        let eg = compute_entity_grid(&seq).unwrap();
        prop_assert_eq!(eg.cols(), chars.len() + objs.len());
        let both: Vec<Vec<f64>> = chars.iter().chain(&objs).cloned().collect();
        let want = brute(&imgs, &both);
        for a in 0..eg.rows() {
            prop_assert_eq!(eg.row(a), &want[a][..]);
        }
    }

    #[test]
    fn column_permutation_equivariance((imgs, chars, _objs) in fixture(), rot in 0usize..5) {
        let m = chars.len();
        let perm: Vec<usize> = (0..m).map(|b| (b + rot) % m.max(1)).collect();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&b| chars[b].clone()).collect();
        let g = compute_grid(&record(imgs.clone(), chars, vec![])).unwrap();
        let p = compute_grid(&record(imgs, permuted, vec![])).unwrap();
        for a in 0..g.rows() {
            for (b, &src) in perm.iter().enumerate() {
                prop_assert_eq!(p.get(a, b), g.get(a, src));
            }
        }
    }

    // powers of two keep the scaling exact in floating point
    #[test]
    fn row_scaling_bilinearity((imgs, chars, _objs) in fixture(), exp in -8i32..8, row in 0usize..10) {
        let s = 2f64.powi(exp);
        let a = row % imgs.len();
        let mut scaled = imgs.clone();
        for v in &mut scaled[a] {
            *v *= s;
        }
        let g = compute_grid(&record(imgs, chars.clone(), vec![])).unwrap();
        let h = compute_grid(&record(scaled, chars, vec![])).unwrap();
        for r in 0..g.rows() {
            for b in 0..g.cols() {
                let expected = if r == a { g.get(r, b) * s } else { g.get(r, b) };
                prop_assert_eq!(h.get(r, b), expected);
            }
        }
    }

    #[test]
    fn flatten_is_injective_for_a_fixed_frame(
        (imgs, chars, _objs) in fixture(),
        cell in 0usize..50,
        delta in 0.5f64..5.0,
    ) {
        prop_assume!(!chars.is_empty());
        let g = compute_grid(&record(imgs, chars, vec![])).unwrap();
        let (a, b) = (cell / M_MAX % g.rows(), cell % g.cols());
        let mut values = g.values().to_vec();
        values[a * g.cols() + b] += delta;
        let h = vwp_core::chargrid::CharacterGrid::new(g.image_ids.clone(), g.column_ids.clone(), values).unwrap();
        let fg = flatten_pad(&g, N_MAX, M_MAX).unwrap();
        let fh = flatten_pad(&h, N_MAX, M_MAX).unwrap();
        prop_assert_ne!(&fg, &fh);
        for a in 0..g.rows() {
            for b in 0..g.cols() {
                prop_assert_eq!(fg[a * M_MAX + b], g.get(a, b));
            }
        }
        let occupied = g.rows() * g.cols();
        prop_assert_eq!(fg.iter().filter(|v| **v == 0.0).count() >= N_MAX * M_MAX - occupied, true);
    }

    #[test]
    fn csv_round_trips((imgs, chars, _objs) in fixture()) {
        let g = compute_grid(&record(imgs, chars, vec![])).unwrap();
        prop_assert_eq!(from_csv(&to_csv(&g)).unwrap(), g);
    }

    #[test]
    fn increasing_row_has_monotone_buckets(mut row in prop::collection::vec(-100.0f64..100.0, 2..12)) {
        row.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let g = vwp_core::chargrid::CharacterGrid::new(
            vec!["i".into()],
            (0..row.len()).map(|i| format!("c{i}")).collect(),
            row,
        ).unwrap();
        let b = shade_buckets(&g);
        prop_assert!(b.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(b.iter().all(|x| *x < vwp_core::chargrid::SHADE_LEVELS));
    }
}

#[test]
fn worked_examples() {
    let zero_char = record(
        vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        vec![vec![0.0, 0.0], vec![1.0, 1.0]],
        vec![],
    );
    let g = compute_grid(&zero_char).unwrap();
    assert_eq!((g.get(0, 0), g.get(1, 0)), (0.0, 0.0));
    assert_eq!((g.get(0, 1), g.get(1, 1)), (3.0, 7.0));

    let unit = record(vec![vec![0.0, 1.0, 0.0]], vec![vec![0.0, 1.0, 0.0]], vec![]);
    assert_eq!(compute_grid(&unit).unwrap().get(0, 0), 1.0);

    let no_objects = record(vec![vec![1.0]], vec![vec![1.0]], vec![]);
    assert_eq!(compute_object_grid(&no_objects).unwrap().cols(), 0);

    let bad = record(vec![vec![1.0, 2.0]], vec![vec![1.0]], vec![]);
    assert!(matches!(compute_grid(&bad), Err(Error::Data(_))));
}
