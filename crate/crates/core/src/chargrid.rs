//! The character grid: an images × characters matrix whose cell `(a, b)` is
//! the dot product of image `a`'s global features with character `b`'s
//! features. Object and entity (characters then objects) variants use the
//! same construction over other feature lists.

use std::fmt::Write as _;

use crate::corpus::ImageSequenceRecord;
use crate::error::{Error, Result};

/// Default frame: at most 10 images and 5 characters.
pub const N_MAX: usize = 10;
pub const M_MAX: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterGrid {
    pub image_ids: Vec<String>,
    pub column_ids: Vec<String>,
    /// Row-major `rows × cols` values.
    values: Vec<f64>,
}

impl CharacterGrid {
    pub fn new(image_ids: Vec<String>, column_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != image_ids.len() * column_ids.len() {
            return Err(Error::Shape(format!(
                "grid of {}×{} needs {} values, got {}",
                image_ids.len(),
                column_ids.len(),
                image_ids.len() * column_ids.len(),
                values.len()
            )));
        }
        Ok(CharacterGrid {
            image_ids,
            column_ids,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.image_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.column_ids.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.cols() + b]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, a: usize) -> &[f64] {
        let c = self.cols();
        &self.values[a * c..(a + 1) * c]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn grid_over<'a>(
    seq: &ImageSequenceRecord,
    columns: impl Iterator<Item = (&'a str, &'a [f64])>,
) -> Result<CharacterGrid> {
    let d = seq.feature_dim().unwrap_or(0);
    for img in &seq.images {
        if img.global_feat.len() != d {
            return Err(Error::Data(format!(
                "sequence {}: image {} has dimension {}, expected {d}",
                seq.id,
                img.image_id,
                img.global_feat.len()
            )));
        }
    }
    let columns: Vec<(&str, &[f64])> = columns.collect();
    for (id, feat) in &columns {
        if feat.len() != d {
            return Err(Error::Data(format!(
                "sequence {}: {id} has dimension {}, expected {d}",
                seq.id,
                feat.len()
            )));
        }
    }
    let mut values = Vec::with_capacity(seq.images.len() * columns.len());
    for img in &seq.images {
        for (_, feat) in &columns {
            values.push(dot(&img.global_feat, feat));
        }
    }
    CharacterGrid::new(
        seq.images.iter().map(|i| i.image_id.clone()).collect(),
        columns.iter().map(|(id, _)| id.to_string()).collect(),
        values,
    )
}

/// Images × characters, one column per character in list order.
pub fn compute_grid(seq: &ImageSequenceRecord) -> Result<CharacterGrid> {
    grid_over(
        seq,
        seq.characters
            .iter()
            .map(|c| (c.char_id.as_str(), c.representative_feat.as_slice())),
    )
}

/// Images × detected objects.
pub fn compute_object_grid(seq: &ImageSequenceRecord) -> Result<CharacterGrid> {
    grid_over(
        seq,
        seq.objects()
            .iter()
            .map(|o| (o.object_id.as_str(), o.feat.as_slice())),
    )
}

/// Character columns followed by object columns.
pub fn compute_entity_grid(seq: &ImageSequenceRecord) -> Result<CharacterGrid> {
    let chars = seq
        .characters
        .iter()
        .map(|c| (c.char_id.as_str(), c.representative_feat.as_slice()));
    let objs = seq
        .objects()
        .iter()
        .map(|o| (o.object_id.as_str(), o.feat.as_slice()));
    grid_over(seq, chars.chain(objs))
}

/// Lays the grid into a fixed `n_max × m_max` frame, row-major, zero padded:
/// cell `(a, b)` goes to index `a * m_max + b`.
pub fn flatten_pad(grid: &CharacterGrid, n_max: usize, m_max: usize) -> Result<Vec<f64>> {
    if grid.rows() > n_max || grid.cols() > m_max {
        return Err(Error::Size(format!(
            "grid {}×{} does not fit the {n_max}×{m_max} frame",
            grid.rows(),
            grid.cols()
        )));
    }
    let mut out = vec![0.0; n_max * m_max];
    for a in 0..grid.rows() {
        out[a * m_max..a * m_max + grid.cols()].copy_from_slice(grid.row(a));
    }
    Ok(out)
}

/// Number of shading levels in the text heat table.
pub const SHADE_LEVELS: usize = 5;
const SHADES: [char; SHADE_LEVELS] = [' ', '░', '▒', '▓', '█'];

/// Min-max normalized bucket in `0..SHADE_LEVELS` for every cell; a
/// constant grid maps entirely to bucket 0.
pub fn shade_buckets(grid: &CharacterGrid) -> Vec<usize> {
    let (min, max) = grid
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = max - min;
    grid.values
        .iter()
        .map(|&v| {
            if span <= 0.0 || !span.is_finite() {
                0
            } else {
                (((v - min) / span) * SHADE_LEVELS as f64)
                    .floor()
                    .min((SHADE_LEVELS - 1) as f64) as usize
            }
        })
        .collect()
}

/// CSV with a header row (`image_id` then column ids) and one row per
/// image. Values use the shortest representation that parses back exactly.
pub fn to_csv(grid: &CharacterGrid) -> String {
    let mut out = String::from("image_id");
    for c in &grid.column_ids {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for a in 0..grid.rows() {
        out.push_str(&grid.image_ids[a]);
        for v in grid.row(a) {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn from_csv(text: &str) -> Result<CharacterGrid> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse("grid.csv", 1, "empty grid CSV"))?;
    let mut head = header.split(',');
    if head.next() != Some("image_id") {
        return Err(Error::parse(
            "grid.csv",
            1,
            "header must start with image_id",
        ));
    }
    let column_ids: Vec<String> = head.map(str::to_string).collect();
    let mut image_ids = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().to_string();
        let row: Vec<f64> = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse("grid.csv", i + 1, format!("bad value {f:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != column_ids.len() {
            return Err(Error::parse(
                "grid.csv",
                i + 1,
                format!("{} values for {} columns", row.len(), column_ids.len()),
            ));
        }
        image_ids.push(id);
        values.extend(row);
    }
    CharacterGrid::new(image_ids, column_ids, values)
}

/// Aligned text table of values with a shading glyph per cell.
pub fn heat_table(grid: &CharacterGrid) -> String {
    let buckets = shade_buckets(grid);
    let cells: Vec<String> = grid.values.iter().map(|v| format!("{v:.3}")).collect();
    let id_w = grid
        .image_ids
        .iter()
        .map(|s| s.chars().count())
        .chain(std::iter::once("image".len()))
        .max()
        .unwrap_or(5);
    let col_w = cells
        .iter()
        .map(|c| c.len() + 2)
        .chain(grid.column_ids.iter().map(|c| c.chars().count()))
        .max()
        .unwrap_or(4);
    let mut out = format!("{:<id_w$}", "image");
    for c in &grid.column_ids {
        let _ = write!(out, " | {c:>col_w$}");
    }
    out.push('\n');
    for a in 0..grid.rows() {
        let _ = write!(out, "{:<id_w$}", grid.image_ids[a]);
        for b in 0..grid.cols() {
            let k = a * grid.cols() + b;
            let shade = SHADES[buckets[k]];
            let cell = format!("{} {shade}", cells[k]);
            let _ = write!(out, " | {cell:>col_w$}");
        }
        out.push('\n');
    }
    out
}
