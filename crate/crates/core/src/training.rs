//! Maximum-likelihood training, validation-based model selection and the
//! multi-seed driver.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ImageSequenceRecord, Vocabulary, BOS, EOS, EOS_ID, PAD};
use crate::decoding::{argmax, generate, DecodingConfig};
use crate::error::{Error, ErrorKind, Result};
use crate::metrics::{
    aggregate_runs, meteor_with, score_corpus, EvalPair, MetricConfig, MetricReport,
};
use crate::model::{
    assemble_input, build_model, forward_logits, save_checkpoint, story_loss, story_loss_graph,
    ModelConfig, StoryGenModel,
};
use crate::numerics::{adam_step, AdamConfig, Graph, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub seeds: Vec<u64>,
    pub validation: DecodingConfig,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 16,
            lr: 1e-3,
            clip_norm: 1.0,
            seeds: vec![1, 2, 3],
            validation: DecodingConfig::default(),
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.lr)));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::Config(format!(
                "invalid clip norm {}",
                self.clip_norm
            )));
        }
        self.validation.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub train_loss: Vec<f64>,
    pub val_meteor: Vec<f64>,
    /// 1-based.
    pub best_epoch: usize,
    pub best_checkpoint: Option<PathBuf>,
    /// All metrics of the best epoch's model on the validation split.
    pub best_scores: BTreeMap<String, f64>,
}

/// Training examples: (sequence index, story ids with `[EOS]` appended).
/// Stories without tokens are skipped.
pub fn examples(data: &[ImageSequenceRecord]) -> Vec<(usize, Vec<u32>)> {
    let mut out = Vec::new();
    for (i, seq) in data.iter().enumerate() {
        for story in &seq.stories {
            if story.tokens.is_empty() {
                continue;
            }
            let mut t = story.tokens.clone();
            t.push(EOS_ID);
            out.push((i, t));
        }
    }
    out
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

/// One shuffled pass with Adam and global-norm clipping. `epoch` is
/// 1-based and only used for the RNG stream and error context. Returns the
/// mean training loss over examples.
pub fn train_epoch(
    model: &mut StoryGenModel,
    data: &[ImageSequenceRecord],
    cfg: &TrainConfig,
    seed: u64,
    epoch: usize,
) -> Result<f64> {
    let mut items = examples(data);
    if items.is_empty() {
        return Err(Error::Input("no training stories".into()));
    }
    let mut rng = epoch_rng(seed, epoch);
    items.shuffle(&mut rng);
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let names: Vec<(String, Vec<usize>)> = model
        .params
        .iter()
        .map(|(n, t)| (n.to_string(), t.shape().to_vec()))
        .collect();
    let mut total = 0.0;
    for (b, batch) in items.chunks(cfg.batch_size).enumerate() {
        let fail = |message: String| Error::Training {
            epoch,
            batch: b + 1,
            message,
        };
        model.params.zero_grads();
        for (name, shape) in &names {
            if model.params.grad(name).is_none() {
                model
                    .params
                    .accumulate_grad(name, &Tensor::zeros(shape), 0.0)?;
            }
        }
        let weight = 1.0 / batch.len() as f64;
        for (seq_idx, story) in batch {
            let layout = assemble_input(&model.config, &data[*seq_idx], story)?;
            let mut g = Graph::new();
            // a diverged model usually trips the activation checks before the loss is formed
            let diverged = |e: Error| match e.kind() {
                ErrorKind::Numeric => fail(format!("sequence {}: {e}", data[*seq_idx].id)),
                _ => e,
            };
            let loss = story_loss_graph(
                &mut g,
                &model.config,
                &model.params,
                &layout,
                Some(&mut rng),
            )
            .map_err(diverged)?;
            let value = g.value(loss)[0];
            if !value.is_finite() {
                return Err(fail(format!(
                    "loss is {value} on sequence {}",
                    data[*seq_idx].id
                )));
            }
            total += value;
            let grads = g.backward(loss).map_err(diverged)?;
            g.accumulate_param_grads(&grads, &mut model.params, weight)?;
        }
        let norm = model.params.clip_grad_norm(cfg.clip_norm);
        if !norm.is_finite() {
            return Err(fail(format!("gradient norm is {norm}")));
        }
        adam_step(&mut model.params, &adam)?;
        if let Some((name, _)) = model
            .params
            .iter()
            .find(|(_, t)| t.data().iter().any(|x| !x.is_finite()))
        {
            return Err(fail(format!("parameter {name} became non-finite")));
        }
    }
    Ok(total / items.len() as f64)
}

/// Mean evaluation-mode loss per story (with `[EOS]` appended).
pub fn evaluate_loss(model: &StoryGenModel, data: &[ImageSequenceRecord]) -> Result<f64> {
    let items = examples(data);
    if items.is_empty() {
        return Err(Error::Input("no stories to evaluate".into()));
    }
    let mut total = 0.0;
    for (i, story) in &items {
        total += story_loss(model, &data[*i], story)?;
    }
    Ok(total / items.len() as f64)
}

/// Teacher-forced argmax prediction at every story position: element `i`
/// is the model's guess for `story[i]` given `story[..i]`.
pub fn teacher_forced_predictions(
    model: &StoryGenModel,
    seq: &ImageSequenceRecord,
    story: &[u32],
) -> Result<Vec<u32>> {
    let layout = assemble_input(&model.config, seq, story)?;
    let logits = forward_logits(model, &layout)?;
    let start = layout.bos_index();
    Ok((0..story.len())
        .map(|i| argmax(logits.row(start + i)) as u32)
        .collect())
}

/// Best epoch (1-based) by validation score, earliest on ties.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    if scores.is_empty() {
        return None;
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Some(best + 1)
}

fn visible(vocab: &Vocabulary, ids: &[u32]) -> Vec<String> {
    vocab
        .decode(ids)
        .into_iter()
        .filter(|t| t != BOS && t != EOS && t != PAD)
        .collect()
}

/// Generates one story per sequence and pairs it with that sequence's
/// stories as references. Sequences without stories are skipped.
pub fn validation_pairs(
    model: &StoryGenModel,
    data: &[ImageSequenceRecord],
    vocab: &Vocabulary,
    decoding: &DecodingConfig,
) -> Result<Vec<EvalPair>> {
    let mut pairs = Vec::new();
    for seq in data {
        let references: Vec<Vec<String>> = seq
            .stories
            .iter()
            .filter(|s| !s.tokens.is_empty())
            .map(|s| visible(vocab, &s.tokens))
            .collect();
        if references.is_empty() {
            continue;
        }
        let ids = generate(model, seq, decoding)?;
        pairs.push(EvalPair {
            id: seq.id.clone(),
            hypothesis: visible(vocab, &ids),
            references,
        });
    }
    if pairs.is_empty() {
        return Err(Error::Input("validation split has no stories".into()));
    }
    Ok(pairs)
}

fn meteor_or_zero(pairs: &[EvalPair], metrics: &MetricConfig) -> Result<f64> {
    // an all-empty hypothesis corpus has no defined METEOR; it is also the worst possible output
    if pairs.iter().all(|p| p.hypothesis.is_empty()) {
        return Ok(0.0);
    }
    meteor_with(pairs, metrics)
}

/// Trains one seed to completion and returns its log and best model.
pub fn fit_seed(
    cfg: &TrainConfig,
    model_config: &ModelConfig,
    train: &[ImageSequenceRecord],
    val: &[ImageSequenceRecord],
    vocab: &Vocabulary,
    seed: u64,
) -> Result<(RunLog, StoryGenModel)> {
    cfg.validate()?;
    let metrics = MetricConfig::default();
    let mut mc = model_config.clone();
    mc.seed = seed;
    let mut model = build_model(&mc)?;
    let mut best: Option<(f64, StoryGenModel)> = None;
    let mut log = RunLog {
        seed,
        train_loss: Vec::new(),
        val_meteor: Vec::new(),
        best_epoch: 0,
        best_checkpoint: None,
        best_scores: BTreeMap::new(),
    };
    for epoch in 1..=cfg.epochs {
        let loss = train_epoch(&mut model, train, cfg, seed, epoch)?;
        // overflow that only shows up when decoding is charged to the last update
        let batches = examples(train).len().div_ceil(cfg.batch_size);
        let pairs =
            validation_pairs(&model, val, vocab, &cfg.validation).map_err(|e| match e.kind() {
                ErrorKind::Numeric => Error::Training {
                    epoch,
                    batch: batches,
                    message: format!("validation decoding failed: {e}"),
                },
                _ => e,
            })?;
        let score = meteor_or_zero(&pairs, &metrics)?;
        log::info!("seed {seed} epoch {epoch}: train loss {loss:.4}, val METEOR {score:.4}");
        log.train_loss.push(loss);
        log.val_meteor.push(score);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, model.clone()));
        }
    }
    let (_, best_model) = best.expect("at least one epoch ran");
    log.best_epoch = select_best(&log.val_meteor).expect("scores recorded");
    let pairs = validation_pairs(&best_model, val, vocab, &cfg.validation)?;
    if pairs.iter().any(|p| !p.hypothesis.is_empty()) {
        log.best_scores = score_corpus(&pairs, &metrics)?
            .named()
            .into_iter()
            .collect();
    }
    if let Some(dir) = &cfg.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let path = dir.join(format!("seed{seed}.ckpt"));
        save_checkpoint(&best_model, &path)?;
        log.best_checkpoint = Some(path);
        write_run_log(&log, &dir.join(format!("seed{seed}.run.json")))?;
    }
    Ok((log, best_model))
}

pub fn write_run_log(log: &RunLog, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(log).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub runs: Vec<RunLog>,
    /// Mean and population std across seeds of each best-epoch metric.
    pub aggregate: MetricReport,
}

/// Runs every seed in turn. Each finished seed's log and checkpoint are on
/// disk (when a checkpoint directory is set) before the next one starts, so
/// a failure keeps the earlier results.
pub fn fit(
    cfg: &TrainConfig,
    model_config: &ModelConfig,
    train: &[ImageSequenceRecord],
    val: &[ImageSequenceRecord],
    vocab: &Vocabulary,
) -> Result<FitReport> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let (log, _) = fit_seed(cfg, model_config, train, val, vocab, seed)
            .map_err(|e| e.context(format!("seed {seed}")))?;
        runs.push(log);
    }
    let mut per_seed: Vec<BTreeMap<String, f64>> = Vec::new();
    for r in &runs {
        let mut m = r.best_scores.clone();
        m.insert("val_METEOR".into(), r.val_meteor[r.best_epoch - 1]);
        per_seed.push(m);
    }
    let system = "model".to_string();
    let aggregate = aggregate_runs(&BTreeMap::from([(system.clone(), per_seed)]), &system)?;
    Ok(FitReport { runs, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_epoch() {
        assert_eq!(select_best(&[0.30, 0.33, 0.31]), Some(2));
        assert_eq!(select_best(&[0.2, 0.2]), Some(1));
        assert_eq!(select_best(&[0.1]), Some(1));
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                seeds: vec![],
                ..TrainConfig::default()
            },
            TrainConfig {
                lr: f64::NAN,
                ..TrainConfig::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }
}
