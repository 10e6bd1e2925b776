//! Dataset records, text processing, vocabulary and splitting.

mod anonymize;
mod record;
mod split;
mod tokenize;
mod vocab;

pub use anonymize::{anonymize, GenderTable, PlaceholderMap};
pub use record::{
    count_sections, parse_dataset, read_dataset, select_representative, validate_spans,
    CharacterInstance, CharacterRecord, EntityKind, EntitySpan, Gender, ImageRecord,
    ImageSequenceRecord, IngestBounds, ObjectRecord, SrlEvent, StoryRecord,
};
pub use split::{split_dataset, Splits};
pub use tokenize::{detokenize, tokenize};
pub use vocab::{
    build_vocab, female_placeholder, is_person_placeholder, male_placeholder, special_tokens,
    Vocabulary, BOS, BOS_ID, EOS, EOS_ID, LOCATION, LOCATION_ID, PAD, PAD_ID, SENT, SENT_ID,
    SLOTS_PER_GENDER, UNK, UNK_ID,
};

use crate::error::Result;

/// Output of [`prepare`]: anonymized, tokenized splits and the vocabulary
/// built from the training split.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub splits: Splits<ImageSequenceRecord>,
    pub vocab: Vocabulary,
    /// (sequence id, story index) → placeholder map
    pub mappings: Vec<(String, usize, PlaceholderMap)>,
}

#[derive(Debug, Clone, Copy)]
pub struct PrepareConfig {
    pub seed: u64,
    pub val_count: usize,
    pub test_count: usize,
    pub min_freq: usize,
}

/// Anonymizes every story, splits by sequence, builds the vocabulary on the
/// training split and encodes all stories with it.
pub fn prepare(
    records: &[ImageSequenceRecord],
    table: &GenderTable,
    cfg: &PrepareConfig,
) -> Result<PreparedCorpus> {
    let mut processed = Vec::with_capacity(records.len());
    let mut mappings = Vec::new();
    for rec in records {
        let mut rec = rec.clone();
        for (i, story) in rec.stories.iter_mut().enumerate() {
            let (anon, map) = anonymize(story, table)
                .map_err(|e| e.context(format!("sequence {} story {i}", rec.id)))?;
            *story = anon;
            mappings.push((rec.id.clone(), i, map));
        }
        processed.push(rec);
    }
    let mut splits = split_dataset(&processed, cfg.seed, cfg.val_count, cfg.test_count)?;
    let train_streams: Vec<Vec<String>> = splits
        .train
        .iter()
        .flat_map(|r| r.stories.iter().map(|s| tokenize(&s.raw_text)))
        .collect();
    let vocab = build_vocab(&train_streams, cfg.min_freq);
    for part in [&mut splits.train, &mut splits.val, &mut splits.test] {
        for rec in part.iter_mut() {
            for story in rec.stories.iter_mut() {
                story.tokens = vocab.encode(&tokenize(&story.raw_text));
            }
        }
    }
    Ok(PreparedCorpus {
        splits,
        vocab,
        mappings,
    })
}
