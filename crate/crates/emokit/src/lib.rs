//! Speech emotion recognition built on speaker-identity embeddings.
//!
//! The pipeline frames WAV utterances, turns each frame into a fixed-dimension
//! embedding through a pluggable backend, averages the frame embeddings into one
//! utterance embedding, and classifies emotions with RBF-kernel SVMs trained by
//! a from-scratch SMO solver. Three classifier heads are provided: a flat
//! 4-class model, a two-stage Sad-First hierarchical classifier, and a binary
//! Neutral-vs-emotion detector. A cosine match-score harness summarizes
//! intra-speaker score variation across emotion pairings, and a synthetic
//! corpus generator makes everything runnable without restricted datasets.

pub mod audio;
pub mod cli;
pub mod dataset;
pub mod embed;
pub mod emotion;
pub mod eval;
pub mod matchscore;
pub mod store;
pub mod svm;
pub mod synth;

/// Sample rate every clip is resampled to before framing. The 22000-sample
/// frame and 220-sample hop then correspond to roughly 1 s and 10 ms.
pub const NOMINAL_SAMPLE_RATE: u32 = 22050;
