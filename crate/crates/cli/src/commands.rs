use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use vwp_core::analytics::{self, AnalyticsReport, AnnotatedStory, WorkerStats};
use vwp_core::chargrid::{
    compute_entity_grid, compute_grid, compute_object_grid, heat_table, to_csv, CharacterGrid,
};
use vwp_core::corpus::{
    prepare, read_dataset, tokenize, GenderTable, ImageSequenceRecord, IngestBounds, PrepareConfig,
    Vocabulary, BOS, EOS, PAD,
};
use vwp_core::decoding::{generate, realize, DecodingConfig, GeneratedStory, NamePool};
use vwp_core::jsonl;
use vwp_core::metrics::{
    aggregate_runs, read_eval_pairs, render_report, score_corpus, EvalPair, MetricConfig,
};
use vwp_core::model::{load_checkpoint, parse_key_values, ModelConfig};
use vwp_core::training::{fit, TrainConfig};
use vwp_core::{Error, Result};

use crate::{
    Analysis, AnalyzeArgs, Command, EvaluateArgs, Format, GenerateArgs, GridArgs, GridKind,
    PlanArgs, PrepareArgs, TrainArgs,
};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Prepare(a) => cmd_prepare(&a),
        Command::Grid(a) => cmd_grid(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Generate(a) => cmd_generate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Plan(a) => cmd_plan(&a),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path.display().to_string(), e)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(io_err(p)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(jsonl::to_sorted_json_pretty(v)? + "\n")
}

fn unsupported(format: Format, what: &str) -> Error {
    Error::Config(format!("{what} does not support --format {format:?}").to_lowercase())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
}

fn bounds() -> IngestBounds {
    IngestBounds::default()
}

fn cmd_prepare(a: &PrepareArgs) -> Result<()> {
    let records = read_dataset(&a.dataset, &bounds())?;
    let table = GenderTable::read(&a.genders)?;
    let cfg = PrepareConfig {
        seed: a.seed,
        val_count: a.val,
        test_count: a.test,
        min_freq: a.min_freq,
    };
    let prepared = prepare(&records, &table, &cfg)?;
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    jsonl::write(&a.out.join("train.jsonl"), &prepared.splits.train)?;
    jsonl::write(&a.out.join("val.jsonl"), &prepared.splits.val)?;
    jsonl::write(&a.out.join("test.jsonl"), &prepared.splits.test)?;
    let mappings: Vec<serde_json::Value> = prepared
        .mappings
        .iter()
        .map(|(id, story, map)| json!({"sequence_id": id, "story": story, "placeholders": map}))
        .collect();
    jsonl::write(&a.out.join("placeholders.jsonl"), &mappings)?;
    let vocab_path = a.out.join("vocab.json");
    std::fs::write(&vocab_path, pretty(&prepared.vocab)?).map_err(io_err(&vocab_path))?;
    log::info!(
        "prepared {} train / {} val / {} test sequences, vocabulary {}",
        prepared.splits.train.len(),
        prepared.splits.val.len(),
        prepared.splits.test.len(),
        prepared.vocab.len()
    );
    Ok(())
}

fn find_sequence<'a>(data: &'a [ImageSequenceRecord], id: &str) -> Result<&'a ImageSequenceRecord> {
    data.iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::Input(format!("no sequence with id {id}")))
}

fn cmd_grid(a: &GridArgs) -> Result<()> {
    let data = read_dataset(&a.dataset, &bounds())?;
    let seq = find_sequence(&data, &a.sequence)?;
    let grid: CharacterGrid = match a.grid_mode {
        GridKind::Char => compute_grid(seq),
        GridKind::Obj => compute_object_grid(seq),
        GridKind::Entity => compute_entity_grid(seq),
    }
    .map_err(|e| e.context(format!("sequence {}", seq.id)))?;
    let text = match a.format {
        Format::Csv => to_csv(&grid),
        Format::Text => heat_table(&grid),
        Format::Json => {
            let rows: Vec<&[f64]> = (0..grid.rows()).map(|r| grid.row(r)).collect();
            pretty(&json!({
                "sequence_id": seq.id,
                "image_ids": grid.image_ids,
                "column_ids": grid.column_ids,
                "values": rows,
            }))?
        }
    };
    emit(a.out.as_deref(), &text)
}

const TRAIN_KEYS: [&str; 7] = [
    "epochs",
    "batch_size",
    "lr",
    "seeds",
    "decoding",
    "p",
    "max_new_tokens",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
}

fn apply_train_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "epochs" => cfg.epochs = parse_num(key, value)?,
        "batch_size" => cfg.batch_size = parse_num(key, value)?,
        "lr" => cfg.lr = parse_num(key, value)?,
        "seeds" => {
            cfg.seeds = value
                .split(',')
                .map(|s| parse_num(key, s.trim()))
                .collect::<Result<Vec<u64>>>()?
        }
        "decoding" => cfg.validation.mode = value.parse()?,
        "p" => cfg.validation.p = parse_num(key, value)?,
        "max_new_tokens" => cfg.validation.max_new_tokens = parse_num(key, value)?,
        other => return Err(Error::Config(format!("unknown training key {other:?}"))),
    }
    Ok(())
}

/// Model and training settings: defaults, then the config file, then flags.
fn train_settings(
    a: &TrainArgs,
    vocab: &Vocabulary,
    feature_dim: usize,
) -> Result<(ModelConfig, TrainConfig)> {
    let mut mc = ModelConfig {
        vocab_size: vocab.len(),
        feature_dim,
        ..ModelConfig::default()
    };
    let mut tc = TrainConfig::default();
    if let Some(path) = &a.model.config {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let kv = parse_key_values(&text).map_err(|e| e.context(path.display().to_string()))?;
        for (k, v) in &kv {
            if TRAIN_KEYS.contains(&k.as_str()) {
                apply_train_key(&mut tc, k, v)?;
            } else {
                mc.set(k, v)
                    .map_err(|e| e.context(path.display().to_string()))?;
            }
        }
    }
    let m = &a.model;
    if let Some(v) = &m.grid_mode {
        mc.set("grid_mode", v)?;
    }
    if let Some(v) = &m.features {
        mc.set("features", v)?;
    }
    if let Some(v) = m.d_model {
        mc.d_model = v;
        mc.ff_width = 4 * v;
    }
    if let Some(v) = m.layers {
        mc.n_layers = v;
    }
    if let Some(v) = m.heads {
        mc.n_heads = v;
    }
    if let Some(v) = m.dropout {
        mc.dropout = v;
    }
    if let Some(v) = m.max_text_len {
        mc.max_text_len = v;
    }
    if let Some(v) = &a.seeds {
        tc.seeds = v.clone();
    }
    if let Some(v) = a.epochs {
        tc.epochs = v;
    }
    if let Some(v) = a.batch_size {
        tc.batch_size = v;
    }
    if let Some(v) = a.lr {
        tc.lr = v;
    }
    if let Some(v) = &a.decoding {
        tc.validation.mode = v.parse()?;
    }
    if let Some(v) = a.p {
        tc.validation.p = v;
    }
    if mc.vocab_size != vocab.len() {
        return Err(Error::Config(format!(
            "vocab_size {} does not match the vocabulary ({})",
            mc.vocab_size,
            vocab.len()
        )));
    }
    mc.validate()?;
    tc.validate()?;
    Ok((mc, tc))
}

fn read_vocab(path: &Path) -> Result<Vocabulary> {
    read_json(path)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let train = read_dataset(&a.data.join("train.jsonl"), &bounds())?;
    let val = read_dataset(&a.data.join("val.jsonl"), &bounds())?;
    let vocab = read_vocab(&a.data.join("vocab.json"))?;
    let feature_dim = train
        .first()
        .and_then(ImageSequenceRecord::feature_dim)
        .ok_or_else(|| Error::Input("training split is empty".into()))?;
    let (mc, mut tc) = train_settings(a, &vocab, feature_dim)?;
    tc.checkpoint_dir = Some(a.out.clone());
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let cfg_path = a.out.join("model.cfg");
    std::fs::write(&cfg_path, mc.to_canonical()).map_err(io_err(&cfg_path))?;
    let report = fit(&tc, &mc, &train, &val, &vocab)?;
    let report_path = a.out.join("report.json");
    std::fs::write(&report_path, pretty(&report)?).map_err(io_err(&report_path))?;
    let text = match a.format {
        Format::Json => pretty(&report)?,
        Format::Text => {
            let mut s = String::new();
            for r in &report.runs {
                let _ = writeln!(
                    s,
                    "seed {}: best epoch {} (val METEOR {:.4}), checkpoint {}",
                    r.seed,
                    r.best_epoch,
                    r.val_meteor[r.best_epoch - 1],
                    r.best_checkpoint
                        .as_deref()
                        .map(Path::display)
                        .map_or("-".into(), |d| d.to_string())
                );
            }
            s + &render_report(&report.aggregate)
        }
        Format::Csv => return Err(unsupported(a.format, "train")),
    };
    emit(None, &text)
}

fn visible(vocab: &Vocabulary, ids: &[u32]) -> Vec<String> {
    vocab
        .decode(ids)
        .into_iter()
        .filter(|t| t != BOS && t != EOS && t != PAD)
        .collect()
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let vocab = read_vocab(&a.vocab)?;
    if vocab.len() != model.config.vocab_size {
        return Err(Error::Data(format!(
            "vocabulary has {} tokens but the checkpoint expects {}",
            vocab.len(),
            model.config.vocab_size
        )));
    }
    let data = read_dataset(&a.dataset, &bounds())?;
    let names: NamePool = match &a.names {
        Some(p) => read_json(p)?,
        None => NamePool::builtin(),
    };
    let cfg = DecodingConfig {
        mode: a.decoding.parse()?,
        p: a.p,
        max_new_tokens: a.max_tokens,
        seed: a.seed,
    };
    cfg.validate()?;
    let mut out = Vec::with_capacity(data.len());
    for (i, seq) in data.iter().enumerate() {
        // one stream per sequence keeps each story independent of the file order before it
        let per_seq = DecodingConfig {
            seed: a.seed.wrapping_add(i as u64),
            ..cfg.clone()
        };
        let ids = generate(&model, seq, &per_seq)
            .map_err(|e| e.context(format!("sequence {}", seq.id)))?;
        let tokens = visible(&vocab, &ids);
        let mut rng = ChaCha8Rng::seed_from_u64(per_seq.seed);
        let text = realize(&tokens, &names, &mut rng)
            .map_err(|e| e.context(format!("sequence {}", seq.id)))?;
        out.push(GeneratedStory {
            sequence_id: seq.id.clone(),
            seed: per_seq.seed,
            tokens,
            text,
        });
    }
    emit(a.out.as_deref(), &jsonl::to_string(&out)?)
}

fn pairs_from_generated(generated: &Path, dataset: &Path) -> Result<Vec<EvalPair>> {
    let stories: Vec<GeneratedStory> = jsonl::read(generated)?;
    let data = read_dataset(dataset, &bounds())?;
    let by_id: HashMap<&str, &ImageSequenceRecord> =
        data.iter().map(|s| (s.id.as_str(), s)).collect();
    stories
        .into_iter()
        .map(|g| {
            let seq = by_id.get(g.sequence_id.as_str()).ok_or_else(|| {
                Error::Input(format!(
                    "generated story for unknown sequence {}",
                    g.sequence_id
                ))
            })?;
            let references: Vec<Vec<String>> =
                seq.stories.iter().map(|s| tokenize(&s.raw_text)).collect();
            if references.is_empty() {
                return Err(Error::Input(format!(
                    "sequence {} has no reference stories",
                    g.sequence_id
                )));
            }
            Ok(EvalPair {
                id: g.sequence_id,
                hypothesis: g.tokens,
                references,
            })
        })
        .collect()
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    if let Some(runs_path) = &a.runs {
        let runs: BTreeMap<String, Vec<BTreeMap<String, f64>>> = read_json(runs_path)?;
        let mut runs = runs;
        if let Some(keep) = &a.metrics {
            for seeds in runs.values_mut() {
                for m in seeds.iter_mut() {
                    m.retain(|k, _| keep.contains(k));
                }
            }
        }
        let report = aggregate_runs(
            &runs,
            a.reference.as_deref().expect("clap requires --reference"),
        )?;
        let text = match a.format {
            Format::Json => pretty(&report)?,
            Format::Text => render_report(&report),
            Format::Csv => return Err(unsupported(a.format, "evaluate --runs")),
        };
        return emit(a.out.as_deref(), &text);
    }
    let pairs = match (&a.input, &a.generated, &a.dataset) {
        (Some(p), _, _) => read_eval_pairs(p)?,
        (None, Some(g), Some(d)) => pairs_from_generated(g, d)?,
        _ => {
            return Err(Error::Config(
                "evaluate needs --input, --generated with --dataset, or --runs".into(),
            ))
        }
    };
    let scores = score_corpus(&pairs, &MetricConfig::default())?;
    let mut named = scores.named();
    if let Some(keep) = &a.metrics {
        for k in keep {
            if !named.contains_key(k) {
                return Err(Error::Config(format!(
                    "unknown or unavailable metric {k:?}"
                )));
            }
        }
        named.retain(|k, _| keep.contains(k));
    }
    let text = match a.format {
        Format::Json => pretty(&json!({"pairs": pairs.len(), "scores": named}))?,
        Format::Csv => {
            let mut s = String::from("metric,score\n");
            for (k, v) in &named {
                let _ = writeln!(s, "{k},{v:?}");
            }
            s
        }
        Format::Text => {
            let mut s = format!("{} pairs (scores ×100)\n", pairs.len());
            for (k, v) in &named {
                let _ = writeln!(s, "{k:<8} {:>7.2}", 100.0 * v);
            }
            s
        }
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    if a.format == Format::Csv {
        return Err(unsupported(a.format, "analyze"));
    }
    let json_out = a.format == Format::Json;
    if a.what == Analysis::Stats {
        let path = a
            .dataset
            .as_ref()
            .ok_or_else(|| Error::Config("analyze stats needs --dataset".into()))?;
        let stats = analytics::corpus_stats(&read_dataset(path, &bounds())?)?;
        let text = if json_out {
            pretty(&stats)?
        } else {
            analytics::render_stats(&stats)
        };
        return emit(a.out.as_deref(), &text);
    }
    let path = a
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("analyze needs --input with an annotated corpus".into()))?;
    let stories: Vec<AnnotatedStory> = analytics::read_annotated(path)?;
    let report: AnalyticsReport = analytics::analyze(&stories, a.history, a.alpha)?;
    let text = match (a.what, json_out) {
        (Analysis::All, true) => pretty(&report)?,
        (Analysis::All, false) => analytics::render_report(&report),
        (Analysis::Coherence, true) => pretty(&report.coherence)?,
        (Analysis::Jaccard, true) => pretty(&report.similarity)?,
        (Analysis::Diversity, true) => pretty(
            &json!({"events": report.diversity, "predicate_ngrams": report.predicate_ngrams}),
        )?,
        (Analysis::Groundedness, true) => pretty(&report.groundedness)?,
        (_, false) => section(&analytics::render_report(&report), a.what),
        (Analysis::Stats, true) => unreachable!("handled above"),
    };
    emit(a.out.as_deref(), &text)
}

/// The part of the full text report that belongs to one analysis.
fn section(full: &str, what: Analysis) -> String {
    let blocks: Vec<&str> = full.split("\n\n").collect();
    let pick = |prefix: &str| {
        blocks
            .iter()
            .filter(|b| b.starts_with(prefix))
            .map(|b| format!("{}\n", b.trim_end()))
            .collect::<String>()
    };
    match what {
        Analysis::Coherence => pick("coherence"),
        Analysis::Jaccard => pick("Jaccard"),
        Analysis::Diversity => pick("vocabulary"),
        Analysis::Groundedness => pick("label") + &pick("groundedness"),
        _ => full.to_string(),
    }
}

#[derive(Serialize)]
struct PlanRow {
    worker_id: String,
    qualified: bool,
    stories_written: u64,
    review_sample: u64,
}

fn cmd_plan(a: &PlanArgs) -> Result<()> {
    if let Some(n) = a.n_w {
        let s = analytics::plan_review_sample(n);
        let text = match a.format {
            Format::Json => pretty(&json!({"n_w": n, "review_sample": s}))?,
            _ => format!("{s}\n"),
        };
        return emit(None, &text);
    }
    let path: &PathBuf = a
        .workers
        .as_ref()
        .expect("clap requires --workers or --n-w");
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let source = path.display().to_string();
    let workers: Vec<(usize, WorkerStats)> = jsonl::parse_numbered(&text, &source)?;
    let mut rows = Vec::with_capacity(workers.len());
    for (line, w) in workers {
        w.validate()
            .map_err(|e| Error::parse(&source, line, e.to_string()))?;
        rows.push(PlanRow {
            qualified: analytics::qualify(&w),
            stories_written: w.stories_written,
            review_sample: analytics::plan_review_sample(w.stories_written),
            worker_id: w.worker_id,
        });
    }
    let out = match a.format {
        Format::Json => pretty(&rows)?,
        Format::Csv => {
            let mut s = String::from("worker_id,qualified,stories_written,review_sample\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    r.worker_id, r.qualified, r.stories_written, r.review_sample
                );
            }
            s
        }
        Format::Text => {
            let mut s = format!(
                "{:<12} {:>9} {:>8} {:>7}\n",
                "worker", "qualified", "written", "review"
            );
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{:<12} {:>9} {:>8} {:>7}",
                    r.worker_id,
                    if r.qualified { "yes" } else { "no" },
                    r.stories_written,
                    r.review_sample
                );
            }
            s
        }
    };
    emit(None, &out)
}
