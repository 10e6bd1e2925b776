//! Corpus coherence, diversity and groundedness measures, and the
//! data-collection planning rules.

mod entity_grid;
mod events;
mod groundedness;
mod planning;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use entity_grid::{
    score_coherence, Coherence, EntityGridModel, EntityRoleGrid, Role, DEFAULT_ALPHA,
    DEFAULT_HISTORY,
};
pub use events::{
    event_diversity, jaccard, jaccard_similarity, predicate_ngram_diversity, EventDiversity,
    SimilarityReport, SrlStory, ARG_ROLES, SIMILARITY_ROLES,
};
pub use groundedness::{
    groundedness_table, percent_tenths, render_groundedness, GroundLabel, GroundednessAnnotation,
    GroundednessCell, GroundednessTable, UnitKind,
};
pub use planning::{
    plan_review_sample, qualify, review_rule, WorkerStats, MIN_ACCEPTANCE, MIN_ACCEPTED,
    MIN_QUALITY,
};

use crate::corpus::{
    is_person_placeholder, tokenize, EntityKind, ImageSequenceRecord, SrlEvent, SENT,
};
use crate::error::{Error, Result};

/// One line of an annotated-corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedStory {
    pub sequence_id: String,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub srl: Vec<SrlEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_grid: Option<EntityRoleGrid>,
    #[serde(default)]
    pub groundedness: Vec<GroundednessAnnotation>,
    /// Main characters; when absent, the person placeholders in `tokens`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characters: Option<Vec<String>>,
}

impl AnnotatedStory {
    pub fn srl_story(&self) -> SrlStory {
        let chars: Vec<String> = match &self.characters {
            Some(c) => c.clone(),
            None => self
                .tokens
                .iter()
                .filter(|t| is_person_placeholder(t))
                .cloned()
                .collect(),
        };
        SrlStory::new(&self.srl, chars)
    }
}

pub fn parse_annotated(text: &str, source: &str) -> Result<Vec<AnnotatedStory>> {
    let items: Vec<(usize, AnnotatedStory)> = crate::jsonl::parse_numbered(text, source)?;
    let mut out = Vec::with_capacity(items.len());
    for (line, s) in items {
        if let Some(g) = &s.entity_grid {
            g.validate()
                .map_err(|e| Error::parse(source, line, e.to_string()))?;
        }
        out.push(s);
    }
    Ok(out)
}

pub fn read_annotated(path: &Path) -> Result<Vec<AnnotatedStory>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_annotated(&text, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSummary {
    pub grids: usize,
    pub mean_ll: f64,
    pub mean_avg_ll: f64,
}

/// Everything `analyze` reports for an annotated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub stories: usize,
    pub coherence: Option<CoherenceSummary>,
    pub similarity: SimilarityReport,
    pub diversity: EventDiversity,
    /// unigram, bigram, trigram
    pub predicate_ngrams: [f64; 3],
    pub groundedness: GroundednessTable,
}

/// Trains the entity-grid model on the corpus's own grids and scores each;
/// groups stories by sequence id for similarity.
pub fn analyze(stories: &[AnnotatedStory], history: usize, alpha: f64) -> Result<AnalyticsReport> {
    let grids: Vec<EntityRoleGrid> = stories
        .iter()
        .filter_map(|s| s.entity_grid.clone())
        .collect();
    let coherence = if grids.is_empty() {
        None
    } else {
        let model = EntityGridModel::train(&grids, history, alpha)?;
        let mut ll = 0.0;
        let mut avg = 0.0;
        for g in &grids {
            let c = score_coherence(&model, g)?;
            ll += c.ll;
            avg += c.avg_ll;
        }
        let n = grids.len() as f64;
        Some(CoherenceSummary {
            grids: grids.len(),
            mean_ll: ll / n,
            mean_avg_ll: avg / n,
        })
    };
    let srl: Vec<SrlStory> = stories.iter().map(AnnotatedStory::srl_story).collect();
    let mut groups: BTreeMap<&str, Vec<SrlStory>> = BTreeMap::new();
    for (s, e) in stories.iter().zip(&srl) {
        groups.entry(&s.sequence_id).or_default().push(e.clone());
    }
    let groups: Vec<Vec<SrlStory>> = groups.into_values().collect();
    let streams: Vec<Vec<&str>> = stories
        .iter()
        .map(|s| {
            s.tokens
                .iter()
                .map(String::as_str)
                .filter(|t| *t != SENT)
                .collect()
        })
        .collect();
    let annotations: Vec<GroundednessAnnotation> = stories
        .iter()
        .flat_map(|s| s.groundedness.iter().copied())
        .collect();
    Ok(AnalyticsReport {
        stories: stories.len(),
        coherence,
        similarity: jaccard_similarity(&groups),
        diversity: event_diversity(&srl, &streams),
        predicate_ngrams: predicate_ngram_diversity(&srl),
        groundedness: groundedness_table(&annotations),
    })
}

pub fn render_report(r: &AnalyticsReport) -> String {
    let mut out = format!("stories: {}\n\n", r.stories);
    match &r.coherence {
        Some(c) => {
            let _ = writeln!(
                out,
                "coherence over {} grids: LL {:.3}, avg LL {:.3}\n",
                c.grids, c.mean_ll, c.mean_avg_ll
            );
        }
        None => out.push_str("coherence: no entity grids\n\n"),
    }
    let _ = writeln!(
        out,
        "Jaccard similarity over {} sequences ({} skipped)",
        r.similarity.sequences, r.similarity.skipped
    );
    for role in SIMILARITY_ROLES {
        let _ = writeln!(out, "  {role:<11} {:.3}", r.similarity.by_role[role]);
    }
    let d = &r.diversity;
    let _ = writeln!(
        out,
        "\nvocabulary {}, verbs {}, verb:voc {:.2}%, verb:tok {:.2}%, diverse verbs {:.1}%",
        d.vocab_size, d.unique_verbs, d.verb_vocab_pct, d.verb_token_pct, d.diverse_verb_pct
    );
    let _ = writeln!(
        out,
        "predicate unique:total  unigram {:.2}%  bigram {:.2}%  trigram {:.2}%\n",
        100.0 * r.predicate_ngrams[0],
        100.0 * r.predicate_ngrams[1],
        100.0 * r.predicate_ngrams[2]
    );
    if r.groundedness.is_empty() {
        out.push_str("groundedness: no annotations\n");
    } else {
        out.push_str(&render_groundedness(&r.groundedness));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub texts: usize,
    pub images_per_text: [usize; 2],
    pub tokens_per_text: f64,
    /// Mean over stories that carry event annotations; `None` if none do.
    pub events_per_text: Option<f64>,
    pub characters_per_text: f64,
}

/// Dataset statistics over all stories. Tokens exclude `[sent]`;
/// characters are distinct person entities named in the story.
pub fn corpus_stats(data: &[ImageSequenceRecord]) -> Result<CorpusStats> {
    let mut texts = 0usize;
    let mut min_img = usize::MAX;
    let mut max_img = 0;
    let mut tokens = 0usize;
    let mut events = 0usize;
    let mut with_events = 0usize;
    let mut chars = 0usize;
    for seq in data {
        for story in &seq.stories {
            texts += 1;
            min_img = min_img.min(seq.images.len());
            max_img = max_img.max(seq.images.len());
            tokens += tokenize(&story.raw_text)
                .iter()
                .filter(|t| *t != SENT)
                .count();
            if let Some(srl) = &story.srl {
                events += srl.len();
                with_events += 1;
            }
            let names: BTreeSet<&str> = story
                .entity_spans
                .iter()
                .filter(|s| s.kind == EntityKind::Person)
                .map(|s| s.name.as_str())
                .collect();
            chars += names.len();
        }
    }
    if texts == 0 {
        return Err(Error::Input("dataset has no stories".into()));
    }
    let n = texts as f64;
    Ok(CorpusStats {
        texts,
        images_per_text: [min_img, max_img],
        tokens_per_text: tokens as f64 / n,
        events_per_text: (with_events > 0).then(|| events as f64 / with_events as f64),
        characters_per_text: chars as f64 / n,
    })
}

pub fn render_stats(s: &CorpusStats) -> String {
    let events = s
        .events_per_text
        .map_or("-".to_string(), |e| format!("{e:.2}"));
    format!(
        "{:<8} {:<10} {:<12} {:<12} {:<12}\n{:<8} {:<10} {:<12.2} {:<12} {:<12.2}\n",
        "texts",
        "images",
        "tokens/text",
        "events/text",
        "chars/text",
        s.texts,
        format!("{}-{}", s.images_per_text[0], s.images_per_text[1]),
        s.tokens_per_text,
        events,
        s.characters_per_text
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ImageRecord, StoryRecord};

    fn seq(images: usize, stories: Vec<StoryRecord>) -> ImageSequenceRecord {
        ImageSequenceRecord {
            id: "s".into(),
            images: (0..images)
                .map(|i| ImageRecord {
                    image_id: format!("i{i}"),
                    global_feat: vec![0.0],
                })
                .collect(),
            characters: vec![],
            objects: None,
            stories,
        }
    }

    fn event(p: &str) -> SrlEvent {
        SrlEvent {
            predicate: p.into(),
            args: BTreeMap::new(),
        }
    }

    #[test]
    fn stats_examples() {
        let s =
            corpus_stats(&[seq(5, vec![StoryRecord::from_text("a b c d e f g h i j")])]).unwrap();
        assert_eq!(s.tokens_per_text, 10.0);
        assert_eq!(s.images_per_text, [5, 5]);
        assert_eq!(s.events_per_text, None);

        let mut a = StoryRecord::from_text("x");
        a.srl = Some(vec![event("go")]);
        let mut b = StoryRecord::from_text("y");
        b.srl = Some(vec![event("go"), event("see"), event("run")]);
        let s = corpus_stats(&[seq(5, vec![a]), seq(7, vec![b])]).unwrap();
        assert_eq!(s.events_per_text, Some(2.0));
        assert_eq!(s.images_per_text, [5, 7]);
        assert!(corpus_stats(&[]).is_err());
    }

    #[test]
    fn annotated_line() {
        let line = r#"{"sequence_id":"q1","tokens":["[male0]","ran","."],"srl":[{"predicate":"run","args":{"arg0":["[male0]"]}}],"entity_grid":{"entities":["[male0]"],"rows":[["S"]]},"groundedness":[{"kind":"event","label":"Grounded"}]}"#;
        let s = parse_annotated(line, "t").unwrap();
        assert_eq!(
            s[0].srl_story().characters,
            BTreeSet::from(["[male0]".to_string()])
        );
        let r = analyze(&s, DEFAULT_HISTORY, DEFAULT_ALPHA).unwrap();
        assert_eq!(r.similarity.skipped, 1);
        assert!(render_report(&r).contains("E Grounded"));
        let ragged = r#"{"sequence_id":"q","tokens":[],"entity_grid":{"entities":["a"],"rows":[["S","O"]]}}"#;
        assert!(matches!(
            parse_annotated(ragged, "t"),
            Err(Error::Parse { .. })
        ));
    }
}
