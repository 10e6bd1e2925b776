use super::config::{
    GridMode, ModelConfig, SEGMENT_CHARACTER, SEGMENT_GRID, SEGMENT_IMAGE, SEGMENT_TEXT,
};
use crate::chargrid::{compute_grid, compute_object_grid, flatten_pad};
use crate::corpus::{ImageSequenceRecord, BOS_ID};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// One model input: conditioning features followed by `[BOS]` and the story.
///
/// Row order of the sequence is image tokens, character tokens, object
/// tokens, the grid token, then text tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub image_feats: Option<Tensor>,
    pub char_feats: Option<Tensor>,
    pub obj_feats: Option<Tensor>,
    /// Flattened, zero-padded grid frame.
    pub grid: Option<Vec<f64>>,
    /// `[BOS]` followed by the story tokens.
    pub text: Vec<usize>,
    pub segments: Vec<usize>,
    pub positions: Vec<usize>,
    pub targets: Vec<usize>,
    pub loss_mask: Vec<bool>,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Index of the `[BOS]` row.
    pub fn bos_index(&self) -> usize {
        self.len() - self.text.len()
    }

    pub fn loss_positions(&self) -> usize {
        self.loss_mask.iter().filter(|m| **m).count()
    }
}

fn rows(feats: impl Iterator<Item = Vec<f64>>) -> Result<Option<Tensor>> {
    let rows: Vec<Vec<f64>> = feats.collect();
    if rows.is_empty() {
        Ok(None)
    } else {
        Tensor::from_rows(&rows).map(Some)
    }
}

/// Entity frame rows are `[character cells (m_max) | object cells (obj_max)]`
/// so object cells sit at fixed offsets whatever the character count.
fn entity_frame(seq: &ImageSequenceRecord, c: &ModelConfig) -> Result<Vec<f64>> {
    let chars = flatten_pad(&compute_grid(seq)?, c.n_max, c.m_max)?;
    let objs = flatten_pad(&compute_object_grid(seq)?, c.n_max, c.obj_max)?;
    let mut out = Vec::with_capacity(c.n_max * c.grid_width());
    for a in 0..c.n_max {
        out.extend_from_slice(&chars[a * c.m_max..(a + 1) * c.m_max]);
        out.extend_from_slice(&objs[a * c.obj_max..(a + 1) * c.obj_max]);
    }
    Ok(out)
}

/// Lays out one (sequence, story) pair. Position `i` of the text part
/// predicts story token `i`, so the loss mask is true on `[BOS]` and every
/// story token except the last.
pub fn assemble_input(
    config: &ModelConfig,
    seq: &ImageSequenceRecord,
    story: &[u32],
) -> Result<Layout> {
    let c = config;
    let n = seq.images.len();
    let m = seq.characters.len();
    let k = seq.objects().len();
    if story.len() > c.max_text_len {
        return Err(Error::Length(format!(
            "sequence {}: story has {} tokens, limit is {}",
            seq.id,
            story.len(),
            c.max_text_len
        )));
    }
    for (what, count, limit) in [
        ("images", n, c.n_max),
        ("characters", m, c.m_max),
        ("objects", k, c.obj_max),
    ] {
        if count > limit {
            return Err(Error::Size(format!(
                "sequence {}: {count} {what}, frame holds {limit}",
                seq.id
            )));
        }
    }
    let dims = seq
        .images
        .iter()
        .map(|i| i.global_feat.len())
        .chain(seq.characters.iter().map(|ch| ch.representative_feat.len()))
        .chain(seq.objects().iter().map(|o| o.feat.len()));
    for dim in dims {
        if dim != c.feature_dim {
            return Err(Error::Data(format!(
                "sequence {}: feature dimension {dim}, model expects {}",
                seq.id, c.feature_dim
            )));
        }
    }
    if let Some(&bad) = story.iter().find(|t| **t as usize >= c.vocab_size) {
        return Err(Error::Index(format!(
            "token id {bad} outside vocabulary of {}",
            c.vocab_size
        )));
    }

    let image_feats = if c.features.global {
        rows(seq.images.iter().map(|i| i.global_feat.clone()))?
    } else {
        None
    };
    let char_feats = if c.features.char {
        rows(
            seq.characters
                .iter()
                .map(|ch| ch.representative_feat.clone()),
        )?
    } else {
        None
    };
    let obj_feats = if c.features.obj {
        rows(seq.objects().iter().map(|o| o.feat.clone()))?
    } else {
        None
    };
    let grid = match c.grid_mode {
        GridMode::None => None,
        GridMode::Char => Some(flatten_pad(&compute_grid(seq)?, c.n_max, c.m_max)?),
        GridMode::Obj => Some(flatten_pad(&compute_object_grid(seq)?, c.n_max, c.obj_max)?),
        GridMode::Entity => Some(entity_frame(seq, c)?),
    };

    let mut segments = Vec::new();
    let count = |t: &Option<Tensor>| t.as_ref().map_or(0, |t| t.shape()[0]);
    segments.extend(std::iter::repeat_n(SEGMENT_IMAGE, count(&image_feats)));
    segments.extend(std::iter::repeat_n(
        SEGMENT_CHARACTER,
        count(&char_feats) + count(&obj_feats),
    ));
    if grid.is_some() {
        segments.push(SEGMENT_GRID);
    }
    let prefix = segments.len();
    let mut text = Vec::with_capacity(story.len() + 1);
    text.push(BOS_ID as usize);
    text.extend(story.iter().map(|t| *t as usize));
    segments.extend(std::iter::repeat_n(SEGMENT_TEXT, text.len()));

    let total = segments.len();
    let mut targets = vec![0; total];
    let mut loss_mask = vec![false; total];
    for (i, &t) in story.iter().enumerate() {
        targets[prefix + i] = t as usize;
        loss_mask[prefix + i] = true;
    }
    Ok(Layout {
        image_feats,
        char_feats,
        obj_feats,
        grid,
        text,
        segments,
        positions: (0..total).collect(),
        targets,
        loss_mask,
    })
}
