//! RIFF/WAVE parsing and linear-interpolation resampling.
//!
//! Supports PCM-16, PCM-24 and IEEE-float-32 encodings with any channel
//! count; multi-channel audio is collapsed to mono by per-sample channel
//! mean. A PCM-16 writer is included for building test fixtures.

use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed RIFF/WAVE in {path}: {reason}")]
    MalformedRiff { path: String, reason: String },
    #[error("unsupported encoding in {path}: {reason}")]
    UnsupportedEncoding { path: String, reason: String },
    #[error("no audio samples in {path}")]
    EmptyAudio { path: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Mono audio, amplitudes normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_path: String,
}

impl AudioClip {
    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

struct WavFmt {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn u16_le(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn u32_le(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Parse a WAV file into a normalized mono clip.
///
/// Integer samples are scaled by the type's max magnitude (32768 for PCM-16,
/// 8388608 for PCM-24); float samples are clamped to [-1, 1]. Unknown chunks
/// are skipped.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    parse_wav(&bytes, &path.to_string_lossy())
}

pub fn parse_wav(bytes: &[u8], source_path: &str) -> Result<AudioClip, AudioError> {
    let malformed = |reason: &str| AudioError::MalformedRiff {
        path: source_path.to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < 12 {
        return Err(malformed("file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed("missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing WAVE form type"));
    }

    let mut fmt: Option<WavFmt> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_le(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).ok_or_else(|| malformed("chunk size overflow"))?;
        if body_end > bytes.len() {
            return Err(malformed("chunk extends past end of file"));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed("fmt chunk too small"));
                }
                fmt = Some(WavFmt {
                    format_tag: u16_le(&body[0..2]),
                    channels: u16_le(&body[2..4]),
                    sample_rate: u32_le(&body[4..8]),
                    bits_per_sample: u16_le(&body[14..16]),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word-aligned
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;
    if fmt.channels == 0 {
        return Err(malformed("zero channels"));
    }
    if fmt.sample_rate == 0 {
        return Err(malformed("zero sample rate"));
    }

    let unsupported = |reason: String| AudioError::UnsupportedEncoding {
        path: source_path.to_string(),
        reason,
    };
    let interleaved: Vec<f32> = match (fmt.format_tag, fmt.bits_per_sample) {
        (1, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
            .collect(),
        (1, 24) => data
            .chunks_exact(3)
            .map(|c| {
                let v = i32::from_le_bytes([0, c[0], c[1], c[2]]) >> 8;
                v as f32 / 8_388_608.0
            })
            .collect(),
        (3, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]).clamp(-1.0, 1.0))
            .collect(),
        (tag, bits) => {
            return Err(unsupported(format!("format tag {tag} with {bits} bits per sample")))
        }
    };

    let ch = fmt.channels as usize;
    let n_frames = interleaved.len() / ch;
    if n_frames == 0 {
        return Err(AudioError::EmptyAudio { path: source_path.to_string() });
    }
    let samples: Vec<f32> = (0..n_frames)
        .map(|f| {
            let frame = &interleaved[f * ch..(f + 1) * ch];
            frame.iter().sum::<f32>() / ch as f32
        })
        .collect();

    Ok(AudioClip {
        samples,
        sample_rate: fmt.sample_rate,
        source_path: source_path.to_string(),
    })
}

/// Resample by linear interpolation. Output length is
/// `round(len * target_rate / input_rate)`; matching rates return the clip
/// unchanged, bit for bit.
pub fn resample(clip: &AudioClip, target_rate: u32) -> AudioClip {
    assert!(target_rate > 0, "target_rate must be positive");
    if target_rate == clip.sample_rate {
        return clip.clone();
    }
    let n_in = clip.samples.len();
    let n_out =
        (n_in as f64 * target_rate as f64 / clip.sample_rate as f64).round() as usize;
    let ratio = clip.sample_rate as f64 / target_rate as f64;
    let mut out = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let src = i as f64 * ratio;
        let lo = src.floor() as usize;
        let frac = src - lo as f64;
        let a = clip.samples[lo.min(n_in - 1)] as f64;
        let b = clip.samples[(lo + 1).min(n_in - 1)] as f64;
        out.push((a + (b - a) * frac) as f32);
    }
    AudioClip {
        samples: out,
        sample_rate: target_rate,
        source_path: clip.source_path.clone(),
    }
}

/// Write a mono clip as PCM-16. Round-trips through `read_wav` within
/// 1/32768 per sample.
pub fn write_wav_pcm16(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let bytes = encode_wav_pcm16(&clip.samples, clip.sample_rate);
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn encode_wav_pcm16(samples: &[f32], sample_rate: u32) -> Vec<u8> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
