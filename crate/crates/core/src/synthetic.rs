//! A planted corpus where the word told about each image is a function of
//! which characters appear in it.
//!
//! Every sequence gets its own orthonormal character features, and an image's
//! global features are the sum of its present characters' features plus
//! noise. Grid cell `(a, b)` is therefore close to 1 when character `b` is in
//! image `a` and close to 0 otherwise, while the raw features alone only say
//! so relative to the sequence's own character vectors.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{
    CharacterInstance, CharacterRecord, Gender, ImageRecord, ImageSequenceRecord, StoryRecord, SENT,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub sequences: usize,
    pub images: usize,
    pub characters: usize,
    pub feature_dim: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            sequences: 600,
            images: 5,
            characters: 2,
            feature_dim: 8,
            noise: 0.05,
            seed: 0,
        }
    }
}

/// Word told about an image whose present-character bitmask is `mask`.
pub fn section_word(mask: usize) -> String {
    format!("w{mask}")
}

/// Bitmask of present characters for each image of a synthetic record,
/// recovered from the character instances.
pub fn presence_masks(seq: &ImageSequenceRecord) -> Vec<usize> {
    let mut masks = vec![0; seq.images.len()];
    for (b, ch) in seq.characters.iter().enumerate() {
        for inst in &ch.instances {
            masks[inst.image_index] |= 1 << b;
        }
    }
    masks
}

fn orthonormal(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        for u in &basis {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= p * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Generates the corpus. Stories are `w{mask} [sent]` per image.
pub fn grid_corpus(cfg: &SyntheticConfig) -> Result<Vec<ImageSequenceRecord>> {
    if cfg.characters > cfg.feature_dim {
        return Err(Error::Config(format!(
            "{} orthonormal characters need feature_dim ≥ {}",
            cfg.characters, cfg.characters
        )));
    }
    if cfg.images == 0 || cfg.characters == 0 || cfg.characters >= usize::BITS as usize {
        return Err(Error::Config(
            "synthetic corpus needs images and characters".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(cfg.sequences);
    for s in 0..cfg.sequences {
        let chars = orthonormal(&mut rng, cfg.characters, cfg.feature_dim);
        let mut masks: Vec<usize> = (0..cfg.images)
            .map(|_| rng.gen_range(0..1usize << cfg.characters))
            .collect();
        // every character shows up at least once so it has an instance
        for b in 0..cfg.characters {
            if !masks.iter().any(|m| m & (1 << b) != 0) {
                let a = rng.gen_range(0..cfg.images);
                masks[a] |= 1 << b;
            }
        }
        let images = masks
            .iter()
            .enumerate()
            .map(|(a, &mask)| {
                let mut feat: Vec<f64> = (0..cfg.feature_dim)
                    .map(|_| noise.sample(&mut rng))
                    .collect();
                for (b, c) in chars.iter().enumerate() {
                    if mask & (1 << b) != 0 {
                        for (x, y) in feat.iter_mut().zip(c) {
                            *x += y;
                        }
                    }
                }
                ImageRecord {
                    image_id: format!("syn{s:05}_{a}"),
                    global_feat: feat,
                }
            })
            .collect();
        let characters = chars
            .into_iter()
            .enumerate()
            .map(|(b, feat)| CharacterRecord {
                char_id: format!("syn{s:05}_c{b}"),
                gender: if b % 2 == 0 {
                    Gender::Male
                } else {
                    Gender::Female
                },
                instances: masks
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| *m & (1 << b) != 0)
                    .map(|(a, _)| CharacterInstance {
                        image_index: a,
                        bbox: [0, 0, 10, 10],
                        sharpness: rng.gen_range(0.0..1.0),
                    })
                    .collect(),
                representative_feat: feat,
            })
            .collect();
        let text: Vec<String> = masks
            .iter()
            .map(|&m| format!("{} {SENT}", section_word(m)))
            .collect();
        out.push(ImageSequenceRecord {
            id: format!("syn{s:05}"),
            images,
            characters,
            objects: None,
            stories: vec![StoryRecord::from_text(text.join(" "))],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chargrid::compute_grid;
    use crate::corpus::IngestBounds;

    #[test]
    fn planted_grid_and_story() {
        let cfg = SyntheticConfig {
            sequences: 20,
            ..SyntheticConfig::default()
        };
        let corpus = grid_corpus(&cfg).unwrap();
        assert_eq!(corpus, grid_corpus(&cfg).unwrap());
        for seq in &corpus {
            seq.validate(&IngestBounds::default()).unwrap();
            let masks = presence_masks(seq);
            let grid = compute_grid(seq).unwrap();
            for (a, m) in masks.iter().enumerate() {
                for b in 0..cfg.characters {
                    let expected = if m & (1 << b) != 0 { 1.0 } else { 0.0 };
                    assert!(
                        (grid.get(a, b) - expected).abs() < 0.5,
                        "{}",
                        grid.get(a, b)
                    );
                }
            }
            let words: Vec<&str> = seq.stories[0].raw_text.split(' ').step_by(2).collect();
            let expected: Vec<String> = masks.iter().map(|m| section_word(*m)).collect();
            assert_eq!(words, expected);
        }
    }

    #[test]
    fn rejects_impossible_configs() {
        let cfg = SyntheticConfig {
            characters: 9,
            ..SyntheticConfig::default()
        };
        assert!(grid_corpus(&cfg).is_err());
    }
}
