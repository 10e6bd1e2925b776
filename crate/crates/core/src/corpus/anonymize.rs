//! Replaces named characters and locations with placeholder tokens.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::record::{validate_spans, EntityKind, Gender, StoryRecord};
use super::tokenize::tokenize;
use super::vocab::{female_placeholder, male_placeholder, LOCATION, SLOTS_PER_GENDER};
use crate::error::{Error, Result};

/// Name → (male count, female count) from a name-statistics file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenderTable {
    counts: HashMap<String, (u64, u64)>,
}

impl GenderTable {
    pub fn new() -> Self {
        GenderTable::default()
    }

    pub fn insert(&mut self, name: &str, male: u64, female: u64) {
        let e = self.counts.entry(name.to_lowercase()).or_insert((0, 0));
        e.0 += male;
        e.1 += female;
    }

    /// Parses `name,male_count,female_count` lines after a mandatory header.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if is_header(header) => {}
            _ => {
                return Err(Error::parse(
                    source,
                    1,
                    "missing header name,male_count,female_count",
                ))
            }
        }
        let mut table = GenderTable::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [name, male, female] = fields.as_slice() else {
                return Err(Error::parse(
                    source,
                    i + 1,
                    format!("expected 3 fields, got {}", fields.len()),
                ));
            };
            if name.is_empty() {
                return Err(Error::parse(source, i + 1, "empty name"));
            }
            let num = |s: &str| {
                s.parse::<u64>()
                    .map_err(|e| Error::parse(source, i + 1, format!("bad count {s:?}: {e}")))
            };
            table.insert(name, num(male)?, num(female)?);
        }
        Ok(table)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        GenderTable::parse(&text, &path.display().to_string())
    }

    /// Majority gender; `None` for unknown names and exact ties.
    pub fn gender_of(&self, name: &str) -> Option<Gender> {
        let (m, f) = *self.counts.get(&name.to_lowercase())?;
        match m.cmp(&f) {
            std::cmp::Ordering::Greater => Some(Gender::Male),
            std::cmp::Ordering::Less => Some(Gender::Female),
            std::cmp::Ordering::Equal => None,
        }
    }
}

fn is_header(line: &str) -> bool {
    let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
    fields.len() == 3
        && fields[1..]
            .iter()
            .all(|f| !f.is_empty() && f.parse::<u64>().is_err())
}

/// Which real name each placeholder stands for in one story.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceholderMap {
    /// placeholder → (gender, name)
    pub persons: BTreeMap<String, (Gender, String)>,
    /// distinct location names in order of first mention
    pub locations: Vec<String>,
}

impl PlaceholderMap {
    /// Names grouped by gender, in placeholder order.
    pub fn names_by_gender(&self) -> BTreeMap<Gender, Vec<String>> {
        let mut out: BTreeMap<Gender, Vec<String>> = BTreeMap::new();
        for (gender, name) in self.persons.values() {
            out.entry(*gender).or_default().push(name.clone());
        }
        out
    }
}

/// Replaces entity spans with placeholders. The k-th distinct male name (by
/// first mention) becomes `[male{k}]`, likewise for female names; every
/// location becomes `[location]`. Gender comes from the table's majority
/// count; names the table cannot decide alternate male/female in order of
/// first mention. The returned story's text is the space-joined token
/// sequence and carries no spans.
pub fn anonymize(
    story: &StoryRecord,
    table: &GenderTable,
) -> Result<(StoryRecord, PlaceholderMap)> {
    validate_spans(&story.raw_text, &story.entity_spans)?;
    let mut spans: Vec<_> = story.entity_spans.iter().collect();
    spans.sort_by_key(|s| s.start);

    let mut map = PlaceholderMap::default();
    let mut assigned: HashMap<String, String> = HashMap::new();
    let (mut males, mut females, mut unknown) = (0usize, 0usize, 0usize);
    let mut replacements: Vec<(usize, usize, String)> = Vec::with_capacity(spans.len());

    for span in spans {
        let placeholder = match span.kind {
            EntityKind::Location => {
                if !map.locations.contains(&span.name) {
                    map.locations.push(span.name.clone());
                }
                LOCATION.to_string()
            }
            EntityKind::Person => {
                if let Some(p) = assigned.get(&span.name) {
                    p.clone()
                } else {
                    let gender = table.gender_of(&span.name).unwrap_or_else(|| {
                        let g = if unknown % 2 == 0 {
                            Gender::Male
                        } else {
                            Gender::Female
                        };
                        unknown += 1;
                        g
                    });
                    let (slot, make): (&mut usize, fn(usize) -> String) = match gender {
                        Gender::Female => (&mut females, female_placeholder),
                        _ => (&mut males, male_placeholder),
                    };
                    if *slot >= SLOTS_PER_GENDER {
                        return Err(Error::Capacity(format!(
                            "more than {SLOTS_PER_GENDER} distinct {gender:?} characters (at {:?})",
                            span.name
                        )));
                    }
                    let p = make(*slot);
                    *slot += 1;
                    map.persons.insert(p.clone(), (gender, span.name.clone()));
                    assigned.insert(span.name.clone(), p.clone());
                    p
                }
            }
        };
        replacements.push((span.start, span.end, placeholder));
    }

    let chars: Vec<char> = story.raw_text.chars().collect();
    let mut text = String::with_capacity(story.raw_text.len());
    let mut cursor = 0;
    for (start, end, p) in &replacements {
        text.extend(&chars[cursor..*start]);
        text.push(' ');
        text.push_str(p);
        text.push(' ');
        cursor = *end;
    }
    text.extend(&chars[cursor..]);

    let tokens = tokenize(&text);
    let out = StoryRecord {
        raw_text: tokens.join(" "),
        entity_spans: Vec::new(),
        srl: story.srl.clone(),
        tokens: Vec::new(),
    };
    Ok((out, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::record::EntitySpan;

    fn table() -> GenderTable {
        let mut t = GenderTable::new();
        t.insert("John", 5000, 10);
        t.insert("Jack", 3000, 2);
        t.insert("Mary", 4, 7000);
        t.insert("Sam", 100, 100);
        t
    }

    fn span(text: &str, word: &str, kind: EntityKind) -> EntitySpan {
        let byte = text.find(word).unwrap();
        let start = text[..byte].chars().count();
        EntitySpan {
            start,
            end: start + word.chars().count(),
            kind,
            name: word.to_string(),
        }
    }

    fn story(text: &str, ents: &[(&str, EntityKind)]) -> StoryRecord {
        StoryRecord {
            raw_text: text.into(),
            entity_spans: ents.iter().map(|(w, k)| span(text, w, *k)).collect(),
            srl: None,
            tokens: vec![],
        }
    }

    #[test]
    fn placeholder_scheme() {
        let s = story(
            "John met Mary in Paris.",
            &[
                ("John", EntityKind::Person),
                ("Mary", EntityKind::Person),
                ("Paris", EntityKind::Location),
            ],
        );
        let (out, map) = anonymize(&s, &table()).unwrap();
        assert_eq!(out.raw_text, "[male0] met [female0] in [location] .");
        assert_eq!(map.persons["[male0]"], (Gender::Male, "John".into()));
        assert_eq!(map.persons["[female0]"], (Gender::Female, "Mary".into()));
        assert_eq!(map.locations, vec!["Paris".to_string()]);
    }

    #[test]
    fn first_mention_order() {
        let s = story(
            "John met Jack.",
            &[("John", EntityKind::Person), ("Jack", EntityKind::Person)],
        );
        let (out, _) = anonymize(&s, &table()).unwrap();
        assert_eq!(out.raw_text, "[male0] met [male1] .");
    }

    #[test]
    fn repeated_mentions_share_a_placeholder() {
        let text = "Mary saw John. Then Mary left.";
        let mut s = story(text, &[("John", EntityKind::Person)]);
        s.entity_spans.push(EntitySpan {
            start: 0,
            end: 4,
            kind: EntityKind::Person,
            name: "Mary".into(),
        });
        s.entity_spans.push(EntitySpan {
            start: 20,
            end: 24,
            kind: EntityKind::Person,
            name: "Mary".into(),
        });
        let (out, _) = anonymize(&s, &table()).unwrap();
        assert_eq!(
            out.raw_text,
            "[female0] saw [male0] . then [female0] left ."
        );
    }

    #[test]
    fn unknown_and_tied_names_alternate() {
        let s = story(
            "Zed and Sam and Qux.",
            &[
                ("Zed", EntityKind::Person),
                ("Sam", EntityKind::Person),
                ("Qux", EntityKind::Person),
            ],
        );
        let (out, _) = anonymize(&s, &table()).unwrap();
        assert_eq!(out.raw_text, "[male0] and [female0] and [male1] .");
    }

    #[test]
    fn no_entities_is_identity_on_tokens() {
        let s = StoryRecord::from_text("the dog barked .");
        let (out, map) = anonymize(&s, &table()).unwrap();
        assert_eq!(out.raw_text, "the dog barked .");
        assert!(map.persons.is_empty());
    }

    #[test]
    fn idempotent_on_anonymized_text() {
        let s = story(
            "John met Mary.",
            &[("John", EntityKind::Person), ("Mary", EntityKind::Person)],
        );
        let (once, _) = anonymize(&s, &table()).unwrap();
        let (twice, _) = anonymize(&once, &table()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn capacity_error() {
        let names = ["A1", "B2", "C3", "D4", "E5", "F6"];
        let mut t = GenderTable::new();
        for n in names {
            t.insert(n, 10, 0);
        }
        let text = names.join(" ");
        let ents: Vec<_> = names.iter().map(|n| (*n, EntityKind::Person)).collect();
        let s = story(&text, &ents);
        assert!(matches!(anonymize(&s, &t), Err(Error::Capacity(_))));
    }

    #[test]
    fn gender_table_parsing() {
        let t = GenderTable::parse(
            "name,male_count,female_count\nJohn,10,1\n\nmary, 0 ,9\n",
            "g.csv",
        )
        .unwrap();
        assert_eq!(t.gender_of("JOHN"), Some(Gender::Male));
        assert_eq!(t.gender_of("Mary"), Some(Gender::Female));
        assert_eq!(t.gender_of("nobody"), None);
        assert!(GenderTable::parse("John,1,2\n", "g").is_err());
        let err = GenderTable::parse("h,m,f\nJohn,x,1\n", "g.csv").unwrap_err();
        assert!(err.to_string().contains("g.csv:2"));
        assert!(GenderTable::parse("", "g").is_err());
    }
}
