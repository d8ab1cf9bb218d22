//! Deterministic synthetic embedding corpus.
//!
//! Each speaker gets a unit-norm centroid, each emotion a global offset
//! shared across speakers (Neutral is anchored at zero), and each utterance
//! adds fresh noise; the sum is re-normalized. Scales are vector norms: a
//! draw with scale s is gaussian with per-component variance s^2/dim, so its
//! length concentrates at s regardless of dimension.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EmotionLabel, LabeledEmbedding, SIX_CLASS};
use crate::embed::Embedding;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub utterances_per_cell: usize,
    pub dim: usize,
    pub emotions: Vec<EmotionLabel>,
    pub speaker_scale: f64,
    pub emotion_offset_scale: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_speakers: 10,
            utterances_per_cell: 5,
            dim: 256,
            emotions: SIX_CLASS.to_vec(),
            speaker_scale: 1.0,
            emotion_offset_scale: 0.6,
            noise_scale: 0.2,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_speakers == 0 {
            return Err(SynthError::InvalidConfig("n_speakers must be >= 1".into()));
        }
        if self.dim == 0 {
            return Err(SynthError::InvalidConfig("dim must be > 0".into()));
        }
        if self.emotions.is_empty() {
            return Err(SynthError::InvalidConfig("emotion set is empty".into()));
        }
        if self.speaker_scale < 0.0 || self.emotion_offset_scale < 0.0 || self.noise_scale < 0.0 {
            return Err(SynthError::InvalidConfig("scales must be >= 0".into()));
        }
        Ok(())
    }
}

const SENTENCES: [&str; 5] = ["s00", "s01", "s02", "s03", "s04"];

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    // per-component sigma = scale / sqrt(dim), so the vector norm is ~scale
    let sigma = scale / (dim as f64).sqrt();
    (0..dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-30 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Generate `n_speakers * emotions * utterances_per_cell` labeled rows,
/// fully deterministic per seed.
pub fn gen_synthetic_corpus(config: &SynthConfig) -> Result<Vec<LabeledEmbedding>, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;

    // global emotion offsets, in label-code order, Neutral pinned to zero
    let mut sorted_emotions = config.emotions.clone();
    sorted_emotions.sort();
    sorted_emotions.dedup();
    let offsets: Vec<Vec<f64>> = sorted_emotions
        .iter()
        .map(|&e| {
            if e == EmotionLabel::Neutral {
                vec![0.0; dim]
            } else {
                gaussian(&mut rng, dim, config.emotion_offset_scale)
            }
        })
        .collect();

    let mut rows = Vec::new();
    for s in 0..config.n_speakers {
        let speaker_id = format!("spk{s:03}");
        let centroid = normalized(gaussian(&mut rng, dim, config.speaker_scale.max(1e-12)));
        for (e_idx, &emotion) in sorted_emotions.iter().enumerate() {
            for u in 0..config.utterances_per_cell {
                let noise = gaussian(&mut rng, dim, config.noise_scale);
                let v: Vec<f64> = (0..dim)
                    .map(|d| centroid[d] + offsets[e_idx][d] + noise[d])
                    .collect();
                let v = normalized(v);
                rows.push(LabeledEmbedding {
                    embedding: Embedding::new(v.into_iter().map(|x| x as f32).collect()),
                    speaker_id: speaker_id.clone(),
                    utterance_id: format!("{speaker_id}_{}_{u:02}", emotion.short()),
                    emotion,
                    sentence_id: Some(SENTENCES[u % SENTENCES.len()].to_string()),
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matchscore::cosine_similarity;

    #[test]
    fn default_corpus_has_300_rows() {
        let rows = gen_synthetic_corpus(&SynthConfig::default()).unwrap();
        assert_eq!(rows.len(), 10 * 6 * 5);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SynthConfig { dim: 32, ..Default::default() };
        let a = gen_synthetic_corpus(&cfg).unwrap();
        let b = gen_synthetic_corpus(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_scales_collapse_each_speaker() {
        let cfg = SynthConfig {
            n_speakers: 3,
            utterances_per_cell: 2,
            dim: 16,
            emotion_offset_scale: 0.0,
            noise_scale: 0.0,
            seed: 5,
            ..Default::default()
        };
        let rows = gen_synthetic_corpus(&cfg).unwrap();
        for spk in ["spk000", "spk001", "spk002"] {
            let of_spk: Vec<_> = rows.iter().filter(|r| r.speaker_id == spk).collect();
            for pair in of_spk.windows(2) {
                assert_eq!(pair[0].embedding, pair[1].embedding);
                let cs = cosine_similarity(&pair[0].embedding, &pair[1].embedding).unwrap();
                assert!((cs - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn embeddings_are_unit_norm() {
        let rows = gen_synthetic_corpus(&SynthConfig { dim: 64, ..Default::default() }).unwrap();
        for r in rows {
            assert!((r.embedding.l2_norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn neutral_offset_is_zero_so_genuine_beats_inter() {
        // with zero noise, same-speaker neutral pairs score exactly 1 while
        // cross-emotion pairs do not
        let cfg = SynthConfig {
            n_speakers: 4,
            utterances_per_cell: 2,
            dim: 64,
            noise_scale: 0.0,
            seed: 9,
            ..Default::default()
        };
        let rows = gen_synthetic_corpus(&cfg).unwrap();
        for spk in ["spk000", "spk001"] {
            let neu: Vec<_> = rows
                .iter()
                .filter(|r| r.speaker_id == spk && r.emotion == EmotionLabel::Neutral)
                .collect();
            let ang: Vec<_> = rows
                .iter()
                .filter(|r| r.speaker_id == spk && r.emotion == EmotionLabel::Angry)
                .collect();
            let genuine = cosine_similarity(&neu[0].embedding, &neu[1].embedding).unwrap();
            let inter = cosine_similarity(&neu[0].embedding, &ang[0].embedding).unwrap();
            assert!((genuine - 1.0).abs() < 1e-9);
            assert!(inter < genuine);
        }
    }

    #[test]
    fn larger_emotion_scale_weakly_lowers_inter_emotion_score() {
        let mut medians = Vec::new();
        for scale in [0.2, 0.6, 1.2] {
            let cfg = SynthConfig {
                n_speakers: 6,
                utterances_per_cell: 2,
                dim: 64,
                emotion_offset_scale: scale,
                noise_scale: 0.0,
                seed: 21,
                ..Default::default()
            };
            let rows = gen_synthetic_corpus(&cfg).unwrap();
            let mut scores = Vec::new();
            for spk in 0..6 {
                let spk = format!("spk{spk:03}");
                let neu = rows
                    .iter()
                    .find(|r| r.speaker_id == spk && r.emotion == EmotionLabel::Neutral)
                    .unwrap();
                let sad = rows
                    .iter()
                    .find(|r| r.speaker_id == spk && r.emotion == EmotionLabel::Sad)
                    .unwrap();
                scores.push(cosine_similarity(&neu.embedding, &sad.embedding).unwrap());
            }
            scores.sort_by(f64::total_cmp);
            medians.push(scores[scores.len() / 2]);
        }
        assert!(medians[0] >= medians[1] && medians[1] >= medians[2], "{medians:?}");
    }

    #[test]
    fn invalid_configs_are_rejected()  {
        let cfg = SynthConfig { n_speakers: 0, ..Default::default() };
        assert!(gen_synthetic_corpus(&cfg).is_err());
        let cfg = SynthConfig { noise_scale: -1.0, ..Default::default() };
        assert!(gen_synthetic_corpus(&cfg).is_err());
    }
}
