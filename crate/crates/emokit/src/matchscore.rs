//! Intra-speaker match-score variation experiment.
//!
//! Cosine similarity is computed between same-speaker, same-sentence
//! utterances across every unordered emotion pair, with two neutral
//! baselines: genuine (same speaker, different neutral utterances) and
//! impostor (different speakers). Results are summarized as box-plot
//! statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use thiserror::Error;

use crate::dataset::{EmotionLabel, LabeledEmbedding};
use crate::embed::Embedding;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("no Neutral utterances; baselines cannot be computed")]
    MissingNeutral,
    #[error("no scores to summarize")]
    EmptyScores,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One cell of the experiment: an unordered emotion pair or a neutral
/// baseline. `InterEmotion` is kept canonical, lower label code first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PairingKind {
    InterEmotion(EmotionLabel, EmotionLabel),
    GenuineNeutral,
    ImpostorNeutral,
}

impl PairingKind {
    pub fn inter(a: EmotionLabel, b: EmotionLabel) -> PairingKind {
        assert!(a != b, "inter-emotion pair needs two distinct emotions");
        if a.code() <= b.code() {
            PairingKind::InterEmotion(a, b)
        } else {
            PairingKind::InterEmotion(b, a)
        }
    }
}

impl fmt::Display for PairingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairingKind::InterEmotion(a, b) => write!(f, "{}-{}", a.short(), b.short()),
            PairingKind::GenuineNeutral => f.write_str("GENUINE-NEU"),
            PairingKind::ImpostorNeutral => f.write_str("IMPOSTOR-NEU"),
        }
    }
}

/// a.b / (|a| |b|), in [-1, 1].
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, MatchError> {
    if a.dim() != b.dim() {
        return Err(MatchError::DimMismatch { expected: a.dim(), got: b.dim() });
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.values.iter().zip(&b.values) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(MatchError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// All unordered distinct pairs of the given emotions in canonical order,
/// followed by the two neutral baselines. Six emotions give 15 pairs.
pub fn enumerate_pairings(emotions: &[EmotionLabel]) -> Vec<PairingKind> {
    let mut sorted = emotions.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut out = Vec::new();
    for (i, &a) in sorted.iter().enumerate() {
        for &b in &sorted[i + 1..] {
            out.push(PairingKind::inter(a, b));
        }
    }
    out.push(PairingKind::GenuineNeutral);
    out.push(PairingKind::ImpostorNeutral);
    out
}

/// One match score with the speaker(s) it came from; impostor rows carry
/// both speakers joined by `|`.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreRow {
    pub speaker: String,
    pub score: f64,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub scores: BTreeMap<PairingKind, Vec<ScoreRow>>,
    /// Pairing kinds for which no eligible pair existed in the data.
    pub no_eligible_pairs: Vec<PairingKind>,
}

/// Cap on impostor pairs; beyond it a seeded subsample is taken.
pub const IMPOSTOR_CAP: usize = 10_000;

/// Run the full experiment over a labeled corpus.
///
/// Inter-emotion scores pair same-speaker, same-sentence utterances of the
/// two emotions; genuine-neutral pairs distinct Neutral utterances of one
/// speaker; impostor-neutral pairs Neutral utterances across speakers
/// (same sentence when any such pair exists, else any).
pub fn run_matchscore_experiment(
    data: &[LabeledEmbedding],
    seed: u64,
) -> Result<ExperimentResult, MatchError> {
    if !data.iter().any(|r| r.emotion == EmotionLabel::Neutral) {
        return Err(MatchError::MissingNeutral);
    }
    let mut emotions: Vec<EmotionLabel> = data.iter().map(|r| r.emotion).collect();
    emotions.sort();
    emotions.dedup();
    let kinds = enumerate_pairings(&emotions);

    let mut scores: BTreeMap<PairingKind, Vec<ScoreRow>> =
        kinds.iter().map(|&k| (k, Vec::new())).collect();

    // deterministic speaker order: first appearance
    let mut speakers: Vec<&str> = Vec::new();
    for r in data {
        if !speakers.contains(&r.speaker_id.as_str()) {
            speakers.push(&r.speaker_id);
        }
    }

    for &spk in &speakers {
        let rows: Vec<&LabeledEmbedding> =
            data.iter().filter(|r| r.speaker_id == spk).collect();

        // inter-emotion: same sentence, two different emotions
        for kind in &kinds {
            let (e1, e2) = match kind {
                PairingKind::InterEmotion(a, b) => (*a, *b),
                _ => continue,
            };
            let bucket = scores.get_mut(kind).expect("kind present");
            for r1 in rows.iter().filter(|r| r.emotion == e1) {
                for r2 in rows.iter().filter(|r| r.emotion == e2) {
                    if r1.sentence_id.is_some() && r1.sentence_id == r2.sentence_id {
                        bucket.push(ScoreRow {
                            speaker: spk.to_string(),
                            score: cosine_similarity(&r1.embedding, &r2.embedding)?,
                        });
                    }
                }
            }
        }

        // genuine neutral: distinct neutral utterances of this speaker
        let neutral: Vec<&&LabeledEmbedding> =
            rows.iter().filter(|r| r.emotion == EmotionLabel::Neutral).collect();
        let bucket = scores.get_mut(&PairingKind::GenuineNeutral).expect("kind present");
        for (i, r1) in neutral.iter().enumerate() {
            for r2 in &neutral[i + 1..] {
                bucket.push(ScoreRow {
                    speaker: spk.to_string(),
                    score: cosine_similarity(&r1.embedding, &r2.embedding)?,
                });
            }
        }
    }

    // impostor neutral: across speakers, same sentence preferred
    let neutral: Vec<&LabeledEmbedding> =
        data.iter().filter(|r| r.emotion == EmotionLabel::Neutral).collect();
    let mut impostor_pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..neutral.len() {
        for j in i + 1..neutral.len() {
            if neutral[i].speaker_id != neutral[j].speaker_id
                && neutral[i].sentence_id.is_some()
                && neutral[i].sentence_id == neutral[j].sentence_id
            {
                impostor_pairs.push((i, j));
            }
        }
    }
    if impostor_pairs.is_empty() {
        for i in 0..neutral.len() {
            for j in i + 1..neutral.len() {
                if neutral[i].speaker_id != neutral[j].speaker_id {
                    impostor_pairs.push((i, j));
                }
            }
        }
    }
    if impostor_pairs.len() > IMPOSTOR_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = rand::seq::index::sample(&mut rng, impostor_pairs.len(), IMPOSTOR_CAP);
        let mut subsample: Vec<(usize, usize)> =
            picked.iter().map(|i| impostor_pairs[i]).collect();
        subsample.sort_unstable();
        impostor_pairs = subsample;
    }
    let bucket = scores.get_mut(&PairingKind::ImpostorNeutral).expect("kind present");
    for (i, j) in impostor_pairs {
        bucket.push(ScoreRow {
            speaker: format!("{}|{}", neutral[i].speaker_id, neutral[j].speaker_id),
            score: cosine_similarity(&neutral[i].embedding, &neutral[j].embedding)?,
        });
    }

    let no_eligible_pairs: Vec<PairingKind> = scores
        .iter()
        .filter(|(_, v)| v.is_empty())
        .map(|(&k, _)| k)
        .collect();
    Ok(ExperimentResult { scores, no_eligible_pairs })
}

/// Five-number summary with Tukey 1.5*IQR whiskers clipped to the data.
/// Quartiles use the exclusive-median convention: q1 and q3 are the medians
/// of the lower and upper halves, excluding the overall median when n is odd.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub n_outliers: usize,
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn box_stats(scores: &[f64]) -> Result<BoxStats, MatchError> {
    if scores.is_empty() {
        return Err(MatchError::EmptyScores);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = median_of(&sorted);
    let (q1, q3) = if n == 1 {
        (sorted[0], sorted[0])
    } else {
        let lower = &sorted[..n / 2];
        let upper = &sorted[n.div_ceil(2)..];
        (median_of(lower), median_of(upper))
    };
    let iqr = q3 - q1;
    let fence_low = q1 - 1.5 * iqr;
    let fence_high = q3 + 1.5 * iqr;
    let whisker_low = sorted
        .iter()
        .copied()
        .find(|&v| v >= fence_low)
        .unwrap_or(sorted[0]);
    let whisker_high = sorted
        .iter()
        .rev()
        .copied()
        .find(|&v| v <= fence_high)
        .unwrap_or(sorted[n - 1]);
    let n_outliers = sorted.iter().filter(|&&v| v < whisker_low || v > whisker_high).count();
    Ok(BoxStats {
        n,
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[n - 1],
        whisker_low,
        whisker_high,
        n_outliers,
    })
}

impl ExperimentResult {
    pub fn box_stats(&self) -> BTreeMap<PairingKind, BoxStats> {
        self.scores
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(&k, v)| {
                let raw: Vec<f64> = v.iter().map(|r| r.score).collect();
                (k, box_stats(&raw).expect("non-empty"))
            })
            .collect()
    }

    /// CSV with columns pairing_kind, speaker_id, score.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), MatchError> {
        let mut out = String::from("pairing_kind,speaker_id,score\n");
        for (kind, rows) in &self.scores {
            for r in rows {
                out.push_str(&format!("{kind},{},{}\n", r.speaker, r.score));
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// JSON map of pairing kind to box stats.
    pub fn write_boxstats_json(&self, path: impl AsRef<Path>) -> Result<(), MatchError> {
        let stats: BTreeMap<String, BoxStats> =
            self.box_stats().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        fs::write(path, serde_json::to_string_pretty(&stats)?)?;
        Ok(())
    }
}
