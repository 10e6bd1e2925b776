use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::record::ImageSequenceRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded partition of whole sequences. Records are ordered by id before
/// shuffling, so the split does not depend on input order; each split keeps
/// ascending id order.
pub fn split_dataset(
    records: &[ImageSequenceRecord],
    seed: u64,
    val_count: usize,
    test_count: usize,
) -> Result<Splits<ImageSequenceRecord>> {
    if val_count + test_count > 0 && val_count + test_count >= records.len() {
        return Err(Error::Size(format!(
            "cannot take {val_count} validation and {test_count} test sequences from {} records",
            records.len()
        )));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].id.cmp(&records[b].id));
    let mut shuffled = order.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut role = vec![0u8; records.len()];
    for &i in &shuffled[..val_count] {
        role[i] = 1;
    }
    for &i in &shuffled[val_count..val_count + test_count] {
        role[i] = 2;
    }
    let mut splits = Splits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for i in order {
        let r = records[i].clone();
        match role[i] {
            1 => splits.val.push(r),
            2 => splits.test.push(r),
            _ => splits.train.push(r),
        }
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn recs(n: usize) -> Vec<ImageSequenceRecord> {
        (0..n)
            .map(|i| ImageSequenceRecord {
                id: format!("s{i:02}"),
                images: vec![],
                characters: vec![],
                objects: None,
                stories: vec![],
            })
            .collect()
    }

    fn ids(v: &[ImageSequenceRecord]) -> Vec<String> {
        v.iter().map(|r| r.id.clone()).collect()
    }

    #[test]
    fn counts_and_disjointness() {
        let s = split_dataset(&recs(10), 3, 2, 2).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 2));
        let all: HashSet<String> = ids(&s.train)
            .into_iter()
            .chain(ids(&s.val))
            .chain(ids(&s.test))
            .collect();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn deterministic_and_order_independent() {
        let a = split_dataset(&recs(10), 9, 3, 2).unwrap();
        let b = split_dataset(&recs(10), 9, 3, 2).unwrap();
        assert_eq!(a, b);
        let mut rev = recs(10);
        rev.reverse();
        let c = split_dataset(&rev, 9, 3, 2).unwrap();
        assert_eq!(ids(&a.val), ids(&c.val));
    }

    #[test]
    fn degenerate_sizes() {
        let s = split_dataset(&recs(4), 1, 0, 0).unwrap();
        assert_eq!(s.train.len(), 4);
        assert!(matches!(
            split_dataset(&recs(4), 1, 2, 2),
            Err(Error::Size(_))
        ));
    }
}
