//! The grid-conditioned causal transformer and its feature-set variants.

mod checkpoint;
mod config;
mod layout;
mod net;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC,
};
pub use config::{
    parse_key_values, FeatureSet, GridMode, ModelConfig, NUM_SEGMENTS, SEGMENT_CHARACTER,
    SEGMENT_GRID, SEGMENT_IMAGE, SEGMENT_TEXT,
};
pub use layout::{assemble_input, Layout};
pub use net::{forward, forward_logits, story_loss, story_loss_graph};

use crate::corpus::ImageSequenceRecord;
use crate::error::Result;
use crate::numerics::{init_normal, ParamStore, Tensor};

/// Standard deviation of the normal weight initializer.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct StoryGenModel {
    pub config: ModelConfig,
    pub params: ParamStore,
}

/// Anything that can score the next token given a conditioning sequence
/// and the story generated so far.
pub trait LogitSource {
    fn vocab_size(&self) -> usize;
    fn next_logits(&self, seq: &ImageSequenceRecord, prefix: &[u32]) -> Result<Vec<f64>>;
    /// Longest story prefix `next_logits` accepts.
    fn max_story_len(&self) -> usize {
        usize::MAX
    }
}

impl LogitSource for StoryGenModel {
    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn next_logits(&self, seq: &ImageSequenceRecord, prefix: &[u32]) -> Result<Vec<f64>> {
        let layout = assemble_input(&self.config, seq, prefix)?;
        let logits = forward_logits(self, &layout)?;
        let last = layout.len() - 1;
        Ok(logits.row(last).to_vec())
    }

    fn max_story_len(&self) -> usize {
        self.config.max_text_len
    }
}

enum Init {
    Normal,
    Zeros,
    Ones,
}

fn param_specs(c: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = c.d_model;
    let mut out = Vec::new();
    let linear = |out: &mut Vec<_>, name: &str, fan_in: usize, fan_out: usize, bias: bool| {
        out.push((format!("{name}.w"), vec![fan_in, fan_out], Init::Normal));
        if bias {
            out.push((format!("{name}.b"), vec![fan_out], Init::Zeros));
        }
    };
    if c.features.global {
        linear(&mut out, "enc.global", c.feature_dim, d, true);
    }
    if c.features.char {
        linear(&mut out, "enc.char", c.feature_dim, d, true);
    }
    if c.features.obj {
        linear(&mut out, "enc.obj", c.feature_dim, d, true);
    }
    if c.grid_mode != GridMode::None {
        linear(&mut out, "enc.grid", c.n_max * c.grid_width(), d, true);
    }
    out.push(("emb.token".into(), vec![c.vocab_size, d], Init::Normal));
    out.push((
        "emb.position".into(),
        vec![c.max_positions(), d],
        Init::Normal,
    ));
    out.push(("emb.segment".into(), vec![NUM_SEGMENTS, d], Init::Normal));
    for l in 0..c.n_layers {
        let p = format!("block{l}");
        out.push((format!("{p}.ln1.gain"), vec![d], Init::Ones));
        out.push((format!("{p}.ln1.bias"), vec![d], Init::Zeros));
        for proj in ["q", "k", "v", "out"] {
            linear(&mut out, &format!("{p}.attn.{proj}"), d, d, true);
        }
        out.push((format!("{p}.ln2.gain"), vec![d], Init::Ones));
        out.push((format!("{p}.ln2.bias"), vec![d], Init::Zeros));
        linear(&mut out, &format!("{p}.mlp.in"), d, c.ff_width, true);
        linear(&mut out, &format!("{p}.mlp.out"), c.ff_width, d, true);
    }
    out.push(("final_ln.gain".into(), vec![d], Init::Ones));
    out.push(("final_ln.bias".into(), vec![d], Init::Zeros));
    linear(&mut out, "head", d, c.vocab_size, false);
    out
}

/// Names and shapes of every parameter the configuration calls for, in
/// sorted name order.
pub fn parameter_shapes(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let mut v: Vec<_> = param_specs(config)
        .into_iter()
        .map(|(n, s, _)| (n, s))
        .collect();
    v.sort();
    v
}

/// Total number of scalar parameters.
pub fn parameter_count(config: &ModelConfig) -> usize {
    param_specs(config)
        .iter()
        .map(|(_, s, _)| s.iter().product::<usize>())
        .sum()
}

/// Builds a freshly initialized model. Weight matrices and embeddings are
/// drawn from normal(0, 0.02) keyed by parameter name, layer-norm gains
/// start at one and every bias at zero.
pub fn build_model(config: &ModelConfig) -> Result<StoryGenModel> {
    config.validate()?;
    let mut params = ParamStore::new();
    for (name, shape, init) in param_specs(config) {
        let t = match init {
            Init::Normal => init_normal(config.seed, &name, &shape, INIT_STD),
            Init::Zeros => Tensor::zeros(&shape),
            Init::Ones => Tensor::filled(&shape, 1.0),
        };
        params.insert(name, t);
    }
    Ok(StoryGenModel {
        config: config.clone(),
        params,
    })
}
