use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which conditioning feature lists the model receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub global: bool,
    pub char: bool,
    pub obj: bool,
}

impl FeatureSet {
    pub const GLOBAL: FeatureSet = FeatureSet {
        global: true,
        char: false,
        obj: false,
    };
    pub const GLOBAL_CHAR: FeatureSet = FeatureSet {
        global: true,
        char: true,
        obj: false,
    };
    pub const GLOBAL_OBJ: FeatureSet = FeatureSet {
        global: true,
        char: false,
        obj: true,
    };
    pub const ALL: FeatureSet = FeatureSet {
        global: true,
        char: true,
        obj: true,
    };
    pub const TEXT_ONLY: FeatureSet = FeatureSet {
        global: false,
        char: false,
        obj: false,
    };
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.global, "global"),
            (self.char, "char"),
            (self.obj, "obj"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            write!(f, "none")
        } else {
            write!(f, "{}", names.join(","))
        }
    }
}

impl FromStr for FeatureSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut fs = FeatureSet::TEXT_ONLY;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "global" => fs.global = true,
                "char" => fs.char = true,
                "obj" => fs.obj = true,
                "none" => {}
                other => return Err(Error::Config(format!("unknown feature {other:?}"))),
            }
        }
        Ok(fs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    None,
    Char,
    Obj,
    Entity,
}

impl fmt::Display for GridMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridMode::None => "none",
            GridMode::Char => "char",
            GridMode::Obj => "obj",
            GridMode::Entity => "entity",
        })
    }
}

impl FromStr for GridMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(GridMode::None),
            "char" => Ok(GridMode::Char),
            "obj" => Ok(GridMode::Obj),
            "entity" => Ok(GridMode::Entity),
            other => Err(Error::Config(format!("unknown grid mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_width: usize,
    pub vocab_size: usize,
    /// Longest story (in tokens, including the final `[EOS]`).
    pub max_text_len: usize,
    pub feature_dim: usize,
    pub n_max: usize,
    pub m_max: usize,
    pub obj_max: usize,
    pub features: FeatureSet,
    pub grid_mode: GridMode,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 128,
            n_layers: 2,
            n_heads: 4,
            ff_width: 512,
            vocab_size: 16,
            max_text_len: 256,
            feature_dim: 16,
            n_max: crate::chargrid::N_MAX,
            m_max: crate::chargrid::M_MAX,
            obj_max: 20,
            features: FeatureSet::GLOBAL_CHAR,
            grid_mode: GridMode::Char,
            dropout: 0.1,
            seed: 0,
        }
    }
}

/// Segment ids of the four token kinds.
pub const SEGMENT_IMAGE: usize = 0;
pub const SEGMENT_CHARACTER: usize = 1;
pub const SEGMENT_GRID: usize = 2;
pub const SEGMENT_TEXT: usize = 3;
pub const NUM_SEGMENTS: usize = 4;

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_model", self.d_model),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("ff_width", self.ff_width),
            ("vocab_size", self.vocab_size),
            ("max_text_len", self.max_text_len),
            ("feature_dim", self.feature_dim),
            ("n_max", self.n_max),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        let need = match self.grid_mode {
            GridMode::None => None,
            GridMode::Char => (!self.features.char).then_some("char"),
            GridMode::Obj => (!self.features.obj).then_some("obj"),
            GridMode::Entity => {
                (!(self.features.char && self.features.obj)).then_some("char and obj")
            }
        };
        if let Some(f) = need {
            return Err(Error::Config(format!(
                "grid mode {} requires {f} features, feature set is {}",
                self.grid_mode, self.features
            )));
        }
        if self.grid_width() * self.n_max == 0 && self.grid_mode != GridMode::None {
            return Err(Error::Config("grid frame has no cells".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Columns of the grid frame for the configured grid mode.
    pub fn grid_width(&self) -> usize {
        match self.grid_mode {
            GridMode::None => 0,
            GridMode::Char => self.m_max,
            GridMode::Obj => self.obj_max,
            GridMode::Entity => self.m_max + self.obj_max,
        }
    }

    /// Rows of the position table: the longest possible layout over all
    /// variants, so every variant shares one position-table shape.
    pub fn max_positions(&self) -> usize {
        self.n_max + self.m_max + self.obj_max + 1 + 1 + self.max_text_len
    }

    /// Canonical `key=value` lines in sorted key order.
    pub fn to_canonical(&self) -> String {
        let mut kv = BTreeMap::new();
        kv.insert("d_model", self.d_model.to_string());
        kv.insert("n_layers", self.n_layers.to_string());
        kv.insert("n_heads", self.n_heads.to_string());
        kv.insert("ff_width", self.ff_width.to_string());
        kv.insert("vocab_size", self.vocab_size.to_string());
        kv.insert("max_text_len", self.max_text_len.to_string());
        kv.insert("feature_dim", self.feature_dim.to_string());
        kv.insert("n_max", self.n_max.to_string());
        kv.insert("m_max", self.m_max.to_string());
        kv.insert("obj_max", self.obj_max.to_string());
        kv.insert("features", self.features.to_string());
        kv.insert("grid_mode", self.grid_mode.to_string());
        // {:?} on f64 is the shortest exact round-trip form
        kv.insert("dropout", format!("{:?}", self.dropout));
        kv.insert("seed", self.seed.to_string());
        kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Parses canonical text. Every key must be present exactly once.
    pub fn from_canonical(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let mut cfg = ModelConfig::default();
        let expected = 14;
        if kv.len() != expected {
            return Err(Error::Config(format!(
                "model config needs {expected} keys, found {}",
                kv.len()
            )));
        }
        for (k, v) in &kv {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
        }
        match key {
            "d_model" => self.d_model = num(key, value)?,
            "n_layers" => self.n_layers = num(key, value)?,
            "n_heads" => self.n_heads = num(key, value)?,
            "ff_width" => self.ff_width = num(key, value)?,
            "vocab_size" => self.vocab_size = num(key, value)?,
            "max_text_len" => self.max_text_len = num(key, value)?,
            "feature_dim" => self.feature_dim = num(key, value)?,
            "n_max" => self.n_max = num(key, value)?,
            "m_max" => self.m_max = num(key, value)?,
            "obj_max" => self.obj_max = num(key, value)?,
            "features" => self.features = value.parse()?,
            "grid_mode" => self.grid_mode = value.parse()?,
            "dropout" => self.dropout = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => return Err(Error::Config(format!("unknown model key {other:?}"))),
        }
        Ok(())
    }
}

/// `key=value` lines; blank lines and `#` comments are skipped, duplicate
/// keys are rejected.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {k}", i + 1)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip() {
        let mut c = ModelConfig::default();
        c.dropout = 0.123456789;
        c.seed = u64::MAX;
        c.features = FeatureSet::ALL;
        c.grid_mode = GridMode::Entity;
        let text = c.to_canonical();
        assert_eq!(ModelConfig::from_canonical(&text).unwrap(), c);
        let keys: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn validation() {
        let mut c = ModelConfig::default();
        c.n_heads = 3;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ModelConfig::default();
        c.grid_mode = GridMode::Obj;
        assert!(c.validate().is_err());
        c.features = FeatureSet::GLOBAL_OBJ;
        assert!(c.validate().is_ok());
        c.grid_mode = GridMode::Entity;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.dropout = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn key_value_parsing() {
        assert!(parse_key_values("a=1\na=2").is_err());
        assert!(parse_key_values("novalue").is_err());
        let kv = parse_key_values("# c\n b = x \n\n").unwrap();
        assert_eq!(kv["b"], "x");
        assert!(ModelConfig::from_canonical("d_model=8\n").is_err());
        let mut c = ModelConfig::default();
        assert!(c.set("bogus", "1").is_err());
        assert!(c.set("features", "global,tv").is_err());
    }
}
