use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One image sequence with its features, characters and stories. This is
/// the line type of the dataset JSON Lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSequenceRecord {
    pub id: String,
    pub images: Vec<ImageRecord>,
    #[serde(default)]
    pub characters: Vec<CharacterRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<ObjectRecord>>,
    #[serde(default)]
    pub stories: Vec<StoryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub image_id: String,
    pub global_feat: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterInstance {
    pub image_index: usize,
    pub bbox: [i64; 4],
    pub sharpness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterRecord {
    pub char_id: String,
    pub gender: Gender,
    pub instances: Vec<CharacterInstance>,
    pub representative_feat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub object_id: String,
    pub feat: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Person,
    Location,
}

/// A named-entity mention. `start..end` are character (not byte) offsets
/// into the story's raw text; `name` is the canonical entity name shared by
/// all coreferent mentions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub kind: EntityKind,
    pub name: String,
}

/// One semantic-role event: a lemmatized predicate and its argument tokens
/// keyed by role (`arg0`, `arg1`, `arg2`, `arg-loc`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrlEvent {
    pub predicate: String,
    #[serde(default)]
    pub args: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoryRecord {
    pub raw_text: String,
    #[serde(default)]
    pub entity_spans: Vec<EntitySpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub srl: Option<Vec<SrlEvent>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tokens: Vec<u32>,
}

impl StoryRecord {
    pub fn from_text(text: impl Into<String>) -> Self {
        StoryRecord {
            raw_text: text.into(),
            entity_spans: Vec::new(),
            srl: None,
            tokens: Vec::new(),
        }
    }
}

/// Ingest-time bounds on sequence shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestBounds {
    pub min_images: usize,
    pub max_images: usize,
    pub max_characters: usize,
}

impl Default for IngestBounds {
    fn default() -> Self {
        IngestBounds {
            min_images: 5,
            max_images: 10,
            max_characters: 5,
        }
    }
}

/// Number of `[sent]`-delimited sections in a text.
pub fn count_sections(text: &str) -> usize {
    let parts = text
        .split(super::SENT)
        .filter(|p| !p.trim().is_empty())
        .count();
    parts.max(1)
}

impl ImageSequenceRecord {
    /// Feature dimension `D` shared by every vector in the record.
    pub fn feature_dim(&self) -> Option<usize> {
        self.images.first().map(|i| i.global_feat.len())
    }

    pub fn objects(&self) -> &[ObjectRecord] {
        self.objects.as_deref().unwrap_or(&[])
    }

    pub fn validate(&self, bounds: &IngestBounds) -> Result<()> {
        let n = self.images.len();
        if n < bounds.min_images || n > bounds.max_images {
            return Err(Error::Data(format!(
                "{} images, expected between {} and {}",
                n, bounds.min_images, bounds.max_images
            )));
        }
        if self.characters.len() > bounds.max_characters {
            return Err(Error::Data(format!(
                "{} characters exceeds the limit of {}",
                self.characters.len(),
                bounds.max_characters
            )));
        }
        let d = self.feature_dim().unwrap_or(0);
        if d == 0 {
            return Err(Error::Data("empty global feature vector".into()));
        }
        let check = |what: &str, v: &[f64]| -> Result<()> {
            if v.len() != d {
                return Err(Error::Data(format!(
                    "{what} has dimension {}, expected {d}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!("{what} has a non-finite value")));
            }
            Ok(())
        };
        for img in &self.images {
            check(&format!("image {}", img.image_id), &img.global_feat)?;
        }
        let mut ids = HashSet::new();
        for ch in &self.characters {
            if !ids.insert(ch.char_id.as_str()) {
                return Err(Error::Data(format!(
                    "duplicate character id {}",
                    ch.char_id
                )));
            }
            check(
                &format!("character {}", ch.char_id),
                &ch.representative_feat,
            )?;
            for inst in &ch.instances {
                if inst.image_index >= n {
                    return Err(Error::Data(format!(
                        "character {} instance refers to image {} of {}",
                        ch.char_id, inst.image_index, n
                    )));
                }
                if !inst.sharpness.is_finite() {
                    return Err(Error::Data(format!(
                        "character {} has a non-finite sharpness",
                        ch.char_id
                    )));
                }
            }
        }
        for obj in self.objects() {
            check(&format!("object {}", obj.object_id), &obj.feat)?;
        }
        for (si, story) in self.stories.iter().enumerate() {
            let sections = count_sections(&story.raw_text);
            if sections > n {
                return Err(Error::Data(format!(
                    "story {si} has {sections} sections for {n} images"
                )));
            }
            validate_spans(&story.raw_text, &story.entity_spans)
                .map_err(|e| e.context(format!("story {si}")))?;
        }
        Ok(())
    }
}

/// Spans must lie inside the text and must not overlap.
pub fn validate_spans(text: &str, spans: &[EntitySpan]) -> Result<()> {
    let len = text.chars().count();
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    let mut last_end = 0;
    for s in sorted {
        if s.start >= s.end || s.end > len {
            return Err(Error::Data(format!(
                "entity span {}..{} invalid for text of {len} characters",
                s.start, s.end
            )));
        }
        if s.start < last_end {
            return Err(Error::Data(format!(
                "entity span {}..{} overlaps another",
                s.start, s.end
            )));
        }
        last_end = s.end;
    }
    Ok(())
}

/// Parses and validates a dataset JSON Lines text. Sequence ids must be
/// unique.
pub fn parse_dataset(
    text: &str,
    source: &str,
    bounds: &IngestBounds,
) -> Result<Vec<ImageSequenceRecord>> {
    let mut out: Vec<ImageSequenceRecord> = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ImageSequenceRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        rec.validate(bounds)
            .map_err(|e| Error::parse(source, i + 1, format!("sequence {}: {e}", rec.id)))?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::parse(
                source,
                i + 1,
                format!("duplicate sequence id {}", rec.id),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_dataset(
    path: &std::path::Path,
    bounds: &IngestBounds,
) -> Result<Vec<ImageSequenceRecord>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_dataset(&text, &path.display().to_string(), bounds)
}

/// Index of the instance with the highest sharpness; ties go to the lowest
/// image index.
pub fn select_representative(character: &CharacterRecord) -> Result<usize> {
    let mut best: Option<&CharacterInstance> = None;
    for inst in &character.instances {
        best = match best {
            None => Some(inst),
            Some(b) if inst.sharpness > b.sharpness => Some(inst),
            Some(b) if inst.sharpness == b.sharpness && inst.image_index < b.image_index => {
                Some(inst)
            }
            keep => keep,
        };
    }
    best.map(|i| i.image_index)
        .ok_or_else(|| Error::Data(format!("character {} has no instances", character.char_id)))
}
