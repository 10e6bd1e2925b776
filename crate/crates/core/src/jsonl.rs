//! JSON Lines helpers shared by every file format in the crate.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parses one value per non-blank line. Errors carry `source:line`.
pub fn parse<T: DeserializeOwned>(text: &str, source: &str) -> Result<Vec<T>> {
    Ok(parse_numbered(text, source)?
        .into_iter()
        .map(|(_, v)| v)
        .collect())
}

/// Like [`parse`], keeping the 1-based line number of each value.
pub fn parse_numbered<T: DeserializeOwned>(text: &str, source: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value =
            serde_json::from_str(line).map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        out.push((i + 1, value));
    }
    Ok(out)
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse(&text, &path.display().to_string())
}

/// Serializes each item on its own line with map keys in sorted order.
pub fn to_string<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&to_sorted_json(item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let text = to_string(items)?;
    let mut f =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Compact JSON with object keys sorted, for stable diffs.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value uses a BTreeMap without the preserve_order feature
    let v = serde_json::to_value(value).map_err(|e| Error::Data(e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| Error::Data(e.to_string()))
}

pub fn to_sorted_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Data(e.to_string()))?;
    serde_json::to_string_pretty(&v).map_err(|e| Error::Data(e.to_string()))
}
