use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::layout::{assemble_input, Layout};
use super::StoryGenModel;
use crate::corpus::ImageSequenceRecord;
use crate::error::{Error, Result};
use crate::numerics::{Graph, ParamStore, Tensor, Var};

fn linear(g: &mut Graph, p: &ParamStore, name: &str, x: Var, bias: bool) -> Result<Var> {
    let w = g.param(p, &format!("{name}.w"))?;
    let b = if bias {
        Some(g.param(p, &format!("{name}.b"))?)
    } else {
        None
    };
    g.linear(x, w, b)
}

fn layer_norm(g: &mut Graph, p: &ParamStore, name: &str, x: Var) -> Result<Var> {
    let gain = g.param(p, &format!("{name}.gain"))?;
    let bias = g.param(p, &format!("{name}.bias"))?;
    g.layer_norm(x, gain, bias)
}

fn embed(g: &mut Graph, p: &ParamStore, c: &ModelConfig, layout: &Layout) -> Result<Var> {
    let mut parts = Vec::new();
    let encoded = [
        (&layout.image_feats, "enc.global"),
        (&layout.char_feats, "enc.char"),
        (&layout.obj_feats, "enc.obj"),
    ];
    for (feats, name) in encoded {
        if let Some(t) = feats {
            let x = g.constant(t.clone());
            parts.push(linear(g, p, name, x, true)?);
        }
    }
    if let Some(grid) = &layout.grid {
        let x = g.constant(Tensor::new(vec![1, grid.len()], grid.clone())?);
        parts.push(linear(g, p, "enc.grid", x, true)?);
    }
    let table = g.param(p, "emb.token")?;
    parts.push(g.embedding(table, &layout.text)?);
    let x = g.concat_rows(&parts)?;
    if layout.len() > c.max_positions() {
        return Err(Error::Length(format!(
            "layout of {} rows exceeds {} positions",
            layout.len(),
            c.max_positions()
        )));
    }
    let pos_table = g.param(p, "emb.position")?;
    let pos = g.embedding(pos_table, &layout.positions)?;
    let seg_table = g.param(p, "emb.segment")?;
    let seg = g.embedding(seg_table, &layout.segments)?;
    let x = g.add(x, pos)?;
    g.add(x, seg)
}

fn attention(g: &mut Graph, p: &ParamStore, c: &ModelConfig, prefix: &str, x: Var) -> Result<Var> {
    let q = linear(g, p, &format!("{prefix}.attn.q"), x, true)?;
    let k = linear(g, p, &format!("{prefix}.attn.k"), x, true)?;
    let v = linear(g, p, &format!("{prefix}.attn.v"), x, true)?;
    let hd = c.head_dim();
    let scale = 1.0 / (hd as f64).sqrt();
    let mut heads = Vec::with_capacity(c.n_heads);
    for h in 0..c.n_heads {
        let (qh, kh, vh) = if c.n_heads == 1 {
            (q, k, v)
        } else {
            (
                g.slice_cols(q, h * hd, hd)?,
                g.slice_cols(k, h * hd, hd)?,
                g.slice_cols(v, h * hd, hd)?,
            )
        };
        let kt = g.transpose(kh)?;
        let scores = g.matmul(qh, kt)?;
        let scores = g.scale(scores, scale);
        let weights = g.causal_softmax(scores)?;
        heads.push(g.matmul(weights, vh)?);
    }
    let merged = if heads.len() == 1 {
        heads[0]
    } else {
        g.concat_cols(&heads)?
    };
    linear(g, p, &format!("{prefix}.attn.out"), merged, true)
}

/// Builds the forward pass on `g` and returns the `(length × vocab)` logits.
/// Dropout is active only when `rng` is given.
pub fn forward(
    g: &mut Graph,
    config: &ModelConfig,
    params: &ParamStore,
    layout: &Layout,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    let rate = config.dropout;
    let mut x = embed(g, params, config, layout)?;
    x = g.dropout(x, rate, rng.as_deref_mut())?;
    for l in 0..config.n_layers {
        let prefix = format!("block{l}");
        let h = layer_norm(g, params, &format!("{prefix}.ln1"), x)?;
        let a = attention(g, params, config, &prefix, h)?;
        let a = g.dropout(a, rate, rng.as_deref_mut())?;
        x = g.add(x, a)?;
        let h = layer_norm(g, params, &format!("{prefix}.ln2"), x)?;
        let h = linear(g, params, &format!("{prefix}.mlp.in"), h, true)?;
        let h = g.gelu(h);
        let h = linear(g, params, &format!("{prefix}.mlp.out"), h, true)?;
        let h = g.dropout(h, rate, rng.as_deref_mut())?;
        x = g.add(x, h)?;
    }
    let x = layer_norm(g, params, "final_ln", x)?;
    let logits = linear(g, params, "head", x, false)?;
    if !g.value(logits).is_finite() {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    Ok(logits)
}

/// Evaluation-mode logits (no dropout).
pub fn forward_logits(model: &StoryGenModel, layout: &Layout) -> Result<Tensor> {
    let mut g = Graph::new();
    let v = forward(&mut g, &model.config, &model.params, layout, None)?;
    Ok(g.value(v).clone())
}

/// Masked mean cross-entropy over story positions, as a node on `g`.
pub fn story_loss_graph(
    g: &mut Graph,
    config: &ModelConfig,
    params: &ParamStore,
    layout: &Layout,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    if layout.loss_positions() == 0 {
        return Err(Error::EmptyLoss);
    }
    let logits = forward(g, config, params, layout, rng)?;
    g.cross_entropy_masked(logits, &layout.targets, &layout.loss_mask)
}

/// Evaluation-mode loss of `story` (already ending in `[EOS]` if wanted)
/// conditioned on `seq`.
pub fn story_loss(model: &StoryGenModel, seq: &ImageSequenceRecord, story: &[u32]) -> Result<f64> {
    let layout = assemble_input(&model.config, seq, story)?;
    let mut g = Graph::new();
    let v = story_loss_graph(&mut g, &model.config, &model.params, &layout, None)?;
    Ok(g.value(v)[0])
}
