//! Utterance framing and embedding extraction.
//!
//! An utterance is cut into overlapping frames (default 22000 samples with a
//! 220-sample hop, about 1 s / 10 ms at the nominal rate), each frame is mapped
//! to a fixed-dimension embedding by a backend, and the per-frame embeddings
//! are averaged into a single utterance embedding. Utterances shorter than one
//! frame are discarded.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::audio::AudioClip;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("utterance too short: {len} samples, frame length {frame_len}")]
    TooShort { len: usize, frame_len: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("unknown backend: {0}")]
    UnknownBackend(String),
}

/// Fixed-dimension real vector for one frame or one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f32>,
}

impl Embedding {
    pub fn new(values: Vec<f32>) -> Self {
        Embedding { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64, EmbedError> {
        if self.dim() != other.dim() {
            return Err(EmbedError::DimMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum())
    }

    pub fn squared_distance(&self, other: &Embedding) -> Result<f64, EmbedError> {
        if self.dim() != other.dim() {
            return Err(EmbedError::DimMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| {
                let d = a as f64 - b as f64;
                d * d
            })
            .sum())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub dim: usize,
    pub backend: String,
    pub seed: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            frame_len: 22_000,
            hop: 220,
            dim: 256,
            backend: "spectral".to_string(),
            seed: 42,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.frame_len == 0 || self.dim == 0 || self.hop == 0 || self.hop > self.frame_len {
            return Err(EmbedError::EmptyInput);
        }
        Ok(())
    }
}

/// Frame-to-embedding transform. Implementations must be deterministic:
/// identical frame and seed give identical output.
pub trait EmbeddingBackend: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_frame(&self, frame: &[f32]) -> Embedding;
}

/// Split an utterance into frames starting at offsets 0, hop, 2*hop, ...
/// Frame count is floor((N - frame_len)/hop) + 1; utterances shorter than
/// one frame are rejected with `TooShort`.
pub fn frame_utterance(
    samples: &[f32],
    frame_len: usize,
    hop: usize,
) -> Result<Vec<&[f32]>, EmbedError> {
    assert!(frame_len > 0 && hop > 0 && hop <= frame_len);
    let n = samples.len();
    if n < frame_len {
        return Err(EmbedError::TooShort { len: n, frame_len });
    }
    let count = (n - frame_len) / hop + 1;
    Ok((0..count).map(|i| &samples[i * hop..i * hop + frame_len]).collect())
}

/// Component-wise arithmetic mean of a non-empty list of same-dimension
/// embeddings. Accumulates in f64 so the mean of identical vectors is exact.
pub fn average_embedding(embeddings: &[Embedding]) -> Result<Embedding, EmbedError> {
    let first = embeddings.first().ok_or(EmbedError::EmptyInput)?;
    let dim = first.dim();
    let mut acc = vec![0.0f64; dim];
    for e in embeddings {
        if e.dim() != dim {
            return Err(EmbedError::DimMismatch { expected: dim, got: e.dim() });
        }
        for (a, &v) in acc.iter_mut().zip(&e.values) {
            *a += v as f64;
        }
    }
    let n = embeddings.len() as f64;
    Ok(Embedding::new(acc.into_iter().map(|a| (a / n) as f32).collect()))
}

/// Frame the clip, embed every frame, and average into one utterance
/// embedding. Propagates `TooShort` so callers can record the discard.
pub fn extract_utterance_embedding(
    clip: &AudioClip,
    config: &EmbedderConfig,
    backend: &dyn EmbeddingBackend,
) -> Result<Embedding, EmbedError> {
    let frames = frame_utterance(&clip.samples, config.frame_len, config.hop)?;
    let per_frame: Vec<Embedding> = frames.iter().map(|f| backend.embed_frame(f)).collect();
    average_embedding(&per_frame)
}

const STFT_WINDOW: usize = 512;
const STFT_HOP: usize = 256;
const N_MEL: usize = 40;

/// Deterministic stand-in for a learned speaker encoder.
///
/// Per frame: magnitude STFT (Hann window 512, hop 256), 40-band mel
/// filterbank over the nominal Nyquist range, log energies, then per-band
/// mean and standard deviation (an 80-vector) projected to `dim` by a fixed
/// seeded standard-normal matrix and L2-normalized.
pub struct SpectralBaseline {
    dim: usize,
    projection: Vec<f64>, // dim x (2 * N_MEL), row-major
    mel_filters: Vec<Vec<(usize, f64)>>,
    window: Vec<f64>,
    fft: Arc<dyn rustfft::Fft<f64>>,
}

impl SpectralBaseline {
    pub fn new(config: &EmbedderConfig, sample_rate: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n_feat = 2 * N_MEL;
        let projection: Vec<f64> =
            (0..config.dim * n_feat).map(|_| rng.sample(StandardNormal)).collect();
        let window: Vec<f64> = (0..STFT_WINDOW)
            .map(|i| {
                let x = std::f64::consts::PI * 2.0 * i as f64 / STFT_WINDOW as f64;
                0.5 - 0.5 * x.cos()
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(STFT_WINDOW);
        SpectralBaseline {
            dim: config.dim,
            projection,
            mel_filters: mel_filterbank(sample_rate as f64, STFT_WINDOW, N_MEL),
            window,
            fft,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters over FFT bins, equally spaced on the mel scale from
/// 0 Hz to Nyquist. Each filter is a sparse list of (bin, weight).
fn mel_filterbank(sample_rate: f64, n_fft: usize, n_mel: usize) -> Vec<Vec<(usize, f64)>> {
    let n_bins = n_fft / 2 + 1;
    let mel_max = hz_to_mel(sample_rate / 2.0);
    let points: Vec<f64> = (0..n_mel + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mel + 1) as f64) * n_fft as f64 / sample_rate)
        .collect();
    (0..n_mel)
        .map(|m| {
            let (lo, mid, hi) = (points[m], points[m + 1], points[m + 2]);
            let mut filter = Vec::new();
            for bin in lo.floor() as usize..=(hi.ceil() as usize).min(n_bins - 1) {
                let b = bin as f64;
                let w = if b <= mid {
                    (b - lo) / (mid - lo).max(1e-12)
                } else {
                    (hi - b) / (hi - mid).max(1e-12)
                };
                if w > 0.0 {
                    filter.push((bin, w));
                }
            }
            filter
        })
        .collect()
}

impl EmbeddingBackend for SpectralBaseline {
    fn name(&self) -> &str {
        "spectral"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_frame(&self, frame: &[f32]) -> Embedding {
        // log-mel energies per STFT sub-frame
        let n_sub = if frame.len() >= STFT_WINDOW {
            (frame.len() - STFT_WINDOW) / STFT_HOP + 1
        } else {
            1
        };
        let mut log_mel = vec![vec![0.0f64; n_sub]; N_MEL];
        let mut buf = vec![Complex::new(0.0f64, 0.0); STFT_WINDOW];
        for s in 0..n_sub {
            let start = s * STFT_HOP;
            for (i, c) in buf.iter_mut().enumerate() {
                let v = frame.get(start + i).copied().unwrap_or(0.0) as f64;
                *c = Complex::new(v * self.window[i], 0.0);
            }
            self.fft.process(&mut buf);
            for (m, filter) in self.mel_filters.iter().enumerate() {
                let energy: f64 = filter.iter().map(|&(bin, w)| w * buf[bin].norm()).sum();
                log_mel[m][s] = (energy + 1e-10).ln();
            }
        }

        // per-band mean and population std -> 80 features
        let mut feats = vec![0.0f64; 2 * N_MEL];
        for m in 0..N_MEL {
            let mean = log_mel[m].iter().sum::<f64>() / n_sub as f64;
            let var = log_mel[m].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_sub as f64;
            feats[m] = mean;
            feats[N_MEL + m] = var.sqrt();
        }

        // fixed random projection to dim, then L2 normalize
        let n_feat = 2 * N_MEL;
        let mut out = vec![0.0f64; self.dim];
        for (d, o) in out.iter_mut().enumerate() {
            let row = &self.projection[d * n_feat..(d + 1) * n_feat];
            *o = row.iter().zip(&feats).map(|(&p, &f)| p * f).sum();
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-30 {
            for v in &mut out {
                *v /= norm;
            }
        }
        Embedding::new(out.into_iter().map(|v| v as f32).collect())
    }
}

/// Build the backend named in the config. Only the built-in spectral
/// baseline lives here; precomputed-embedding files are handled at the
/// pipeline level since they bypass frame-level extraction.
pub fn make_backend(
    config: &EmbedderConfig,
    sample_rate: u32,
) -> Result<Box<dyn EmbeddingBackend>, EmbedError> {
    match config.backend.as_str() {
        "spectral" => Ok(Box::new(SpectralBaseline::new(config, sample_rate))),
        other => Err(EmbedError::UnknownBackend(other.to_string())),
    }
}
