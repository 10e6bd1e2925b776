use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnitKind {
    #[serde(rename = "event", alias = "Event", alias = "E")]
    Event,
    #[serde(rename = "argument", alias = "Argument", alias = "A")]
    Argument,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroundLabel {
    #[serde(alias = "grounded")]
    Grounded,
    #[serde(alias = "inferred")]
    Inferred,
    // the misspelling appears in published annotation tables
    #[serde(alias = "hallucinated", alias = "Hallucianted", alias = "hallucianted")]
    Hallucinated,
}

impl GroundLabel {
    pub const ALL: [GroundLabel; 3] = [
        GroundLabel::Grounded,
        GroundLabel::Inferred,
        GroundLabel::Hallucinated,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundednessAnnotation {
    pub kind: UnitKind,
    pub label: GroundLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundednessCell {
    pub count: usize,
    /// Percentage in tenths of a percent, rounded half-up.
    pub per_mille: u64,
}

impl GroundednessCell {
    pub fn percent(&self) -> f64 {
        self.per_mille as f64 / 10.0
    }
}

/// Percentage of `count` in `total` to one decimal, half-up, as an integer
/// number of tenths. Exact integer arithmetic.
pub fn percent_tenths(count: usize, total: usize) -> u64 {
    if total == 0 {
        return 0;
    }
    let (c, t) = (count as u128, total as u128);
    ((2000 * c + t) / (2 * t)) as u64
}

/// kind → label → cell. Kinds without annotations are absent; labels of a
/// present kind are always listed.
pub type GroundednessTable = BTreeMap<UnitKind, BTreeMap<GroundLabel, GroundednessCell>>;

pub fn groundedness_table(annotations: &[GroundednessAnnotation]) -> GroundednessTable {
    let mut counts: BTreeMap<UnitKind, BTreeMap<GroundLabel, usize>> = BTreeMap::new();
    for a in annotations {
        let row = counts
            .entry(a.kind)
            .or_insert_with(|| GroundLabel::ALL.iter().map(|l| (*l, 0)).collect());
        *row.get_mut(&a.label).expect("all labels present") += 1;
    }
    counts
        .into_iter()
        .map(|(kind, row)| {
            let total: usize = row.values().sum();
            let cells = row
                .into_iter()
                .map(|(l, count)| {
                    (
                        l,
                        GroundednessCell {
                            count,
                            per_mille: percent_tenths(count, total),
                        },
                    )
                })
                .collect();
            (kind, cells)
        })
        .collect()
}

pub fn render_groundedness(table: &GroundednessTable) -> String {
    let mut out = format!("{:<16} {:>6} {:>6}\n", "label", "#", "%");
    for (kind, row) in table {
        let k = match kind {
            UnitKind::Event => "E",
            UnitKind::Argument => "A",
        };
        for (label, cell) in row {
            let _ = writeln!(
                out,
                "{:<16} {:>6} {:>6.1}",
                format!("{k} {label:?}"),
                cell.count,
                cell.percent()
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn many(kind: UnitKind, label: GroundLabel, n: usize) -> Vec<GroundednessAnnotation> {
        vec![GroundednessAnnotation { kind, label }; n]
    }

    #[test]
    fn published_event_counts() {
        let mut a = many(UnitKind::Event, GroundLabel::Grounded, 164);
        a.extend(many(UnitKind::Event, GroundLabel::Inferred, 134));
        a.extend(many(UnitKind::Event, GroundLabel::Hallucinated, 1));
        let t = groundedness_table(&a);
        let e = &t[&UnitKind::Event];
        assert_eq!(e[&GroundLabel::Grounded].per_mille, 548);
        assert_eq!(e[&GroundLabel::Inferred].per_mille, 448);
        assert_eq!(e[&GroundLabel::Hallucinated].per_mille, 3);
        assert!(!t.contains_key(&UnitKind::Argument));
    }

    #[test]
    fn half_up() {
        assert_eq!(percent_tenths(1, 8), 125);
        assert_eq!(percent_tenths(1, 16), 63); // 6.25 → 6.3
        assert_eq!(percent_tenths(0, 0), 0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(groundedness_table(&[]).is_empty());
        let t = groundedness_table(&many(UnitKind::Argument, GroundLabel::Inferred, 1));
        assert_eq!(
            t[&UnitKind::Argument][&GroundLabel::Inferred].per_mille,
            1000
        );
    }

    #[test]
    fn misspelled_label_accepted() {
        let a: GroundednessAnnotation =
            serde_json::from_str(r#"{"kind":"event","label":"Hallucianted"}"#).unwrap();
        assert_eq!(a.label, GroundLabel::Hallucinated);
        assert!(serde_json::from_str::<GroundednessAnnotation>(
            r#"{"kind":"event","label":"Maybe"}"#
        )
        .is_err());
    }
}
