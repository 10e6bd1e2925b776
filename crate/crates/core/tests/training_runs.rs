use proptest::prelude::*;

use vwp_core::corpus::{build_vocab, tokenize, ImageSequenceRecord, Vocabulary};
use vwp_core::decoding::{DecodingConfig, DecodingMode};
use vwp_core::model::{build_model, encode_checkpoint, FeatureSet, GridMode, ModelConfig};
use vwp_core::synthetic::{grid_corpus, SyntheticConfig};
use vwp_core::training::{evaluate_loss, fit, fit_seed, select_best, train_epoch, TrainConfig};
use vwp_core::Error;

fn corpus(sequences: usize, seed: u64) -> (Vec<ImageSequenceRecord>, Vocabulary) {
    let cfg = SyntheticConfig {
        sequences,
        characters: 2,
        feature_dim: 4,
        seed,
        ..SyntheticConfig::default()
    };
    let mut data = grid_corpus(&cfg).unwrap();
    let streams: Vec<Vec<String>> = data
        .iter()
        .map(|s| tokenize(&s.stories[0].raw_text))
        .collect();
    let vocab = build_vocab(&streams, 1);
    for s in &mut data {
        s.stories[0].tokens = vocab.encode(&tokenize(&s.stories[0].raw_text));
    }
    (data, vocab)
}

fn tiny(vocab: usize) -> ModelConfig {
    ModelConfig {
        d_model: 16,
        n_layers: 1,
        n_heads: 2,
        ff_width: 32,
        vocab_size: vocab,
        max_text_len: 12,
        feature_dim: 4,
        features: FeatureSet::GLOBAL_CHAR,
        grid_mode: GridMode::Char,
        dropout: 0.0,
        ..ModelConfig::default()
    }
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        lr: 1e-2,
        seeds: vec![1],
        validation: DecodingConfig {
            mode: DecodingMode::Nucleus,
            p: 0.1,
            max_new_tokens: 12,
            seed: 7,
        },
        ..TrainConfig::default()
    }
}

#[test]
fn overfits_a_single_example() {
    let (data, vocab) = corpus(1, 3);
    let mut model = build_model(&tiny(vocab.len())).unwrap();
    let cfg = TrainConfig {
        batch_size: 1,
        ..quick(1)
    };
    let mut loss = f64::INFINITY;
    for epoch in 1..=200 {
        loss = train_epoch(&mut model, &data, &cfg, 5, epoch).unwrap();
    }
    assert!(loss < 0.05, "loss after 200 epochs: {loss}");
    assert!(evaluate_loss(&model, &data).unwrap() < 0.05);
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let (data, vocab) = corpus(6, 4);
    let mut model = build_model(&tiny(vocab.len())).unwrap();
    let before = encode_checkpoint(&model);
    let cfg = TrainConfig {
        lr: 0.0,
        ..quick(1)
    };
    let l1 = train_epoch(&mut model, &data, &cfg, 1, 1).unwrap();
    let l2 = train_epoch(&mut model, &data, &cfg, 1, 2).unwrap();
    assert_eq!(encode_checkpoint(&model), before);
    assert!((l1 - l2).abs() < 1e-12, "{l1} vs {l2}");
}

#[test]
fn identical_seed_gives_identical_trajectory_and_checkpoint() {
    let (data, vocab) = corpus(8, 5);
    let (val, _) = corpus(3, 50);
    let mut mc = tiny(vocab.len());
    mc.dropout = 0.1;
    let cfg = quick(3);
    let (a, ma) = fit_seed(&cfg, &mc, &data, &val, &vocab, 9).unwrap();
    let (b, mb) = fit_seed(&cfg, &mc, &data, &val, &vocab, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(encode_checkpoint(&ma), encode_checkpoint(&mb));
    let (c, _) = fit_seed(&cfg, &mc, &data, &val, &vocab, 10).unwrap();
    assert_ne!(a.train_loss, c.train_loss);
}

#[test]
fn multi_seed_fit_writes_logs_and_aggregates() {
    let (data, vocab) = corpus(8, 6);
    let (mut val, _) = corpus(3, 60);
    for s in &mut val {
        s.stories[0].tokens = vocab.encode(&tokenize(&s.stories[0].raw_text));
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        seeds: vec![1, 2, 3],
        checkpoint_dir: Some(dir.path().to_path_buf()),
        ..quick(2)
    };
    let report = fit(&cfg, &tiny(vocab.len()), &data, &val, &vocab).unwrap();
    assert_eq!(report.runs.len(), 3);
    for r in &report.runs {
        assert_eq!(r.train_loss.len(), 2);
        assert_eq!(Some(r.best_epoch), select_best(&r.val_meteor));
        assert!(r.best_checkpoint.as_ref().unwrap().exists());
        assert!(dir.path().join(format!("seed{}.run.json", r.seed)).exists());
    }
    let m = &report.aggregate.systems["model"]["val_METEOR"];
    assert_eq!(m.runs, 3);

    let one = TrainConfig {
        seeds: vec![4],
        checkpoint_dir: None,
        ..quick(1)
    };
    let report = fit(&one, &tiny(vocab.len()), &data, &val, &vocab).unwrap();
    assert_eq!(report.runs[0].best_epoch, 1);
    assert_eq!(report.aggregate.systems["model"]["val_METEOR"].std, 0.0);
}

#[test]
fn divergence_is_reported_with_context() {
    let (data, vocab) = corpus(2, 7);
    let mut model = build_model(&tiny(vocab.len())).unwrap();
    let w = model.params.get_mut("head.w").unwrap();
    w.data_mut()[0] = f64::NAN;
    match train_epoch(&mut model, &data, &quick(1), 1, 3) {
        Err(Error::Numeric(_))
        | Err(Error::Training {
            epoch: 3, batch: 1, ..
        }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #[test]
    fn best_epoch_survives_monotone_maps(scores in prop::collection::vec(0.0f64..1.0, 1..20), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let mapped: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
        prop_assert_eq!(select_best(&scores), select_best(&mapped));
        prop_assert_eq!(select_best(&scores), select_best(&cubed));
    }
}
