//! Persistence for labeled embeddings.
//!
//! Binary "EMB1" container (little-endian): magic `EMB1`, u32 dim, u32 row
//! count, then per row: u16-length-prefixed speaker id, u16-length-prefixed
//! utterance id, u8 emotion code, u16-length-prefixed sentence id (empty for
//! none), dim float32 values. A CSV export mirrors the same rows.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::dataset::{EmotionLabel, LabeledEmbedding};
use crate::embed::Embedding;

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bad magic: not an EMB1 file")]
    BadMagic,
    #[error("truncated file")]
    TruncatedFile,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("unknown emotion code {0}")]
    BadLabel(u8),
    #[error("invalid utf-8 in string field")]
    BadString,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn map_eof(e: std::io::Error) -> StoreError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        StoreError::TruncatedFile
    } else {
        StoreError::Io(e)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<(), StoreError> {
    let bytes = s.as_bytes();
    assert!(bytes.len() <= u16::MAX as usize, "string field too long");
    w.write_u16::<LittleEndian>(bytes.len() as u16)?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, StoreError> {
    let len = r.read_u16::<LittleEndian>().map_err(map_eof)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(map_eof)?;
    String::from_utf8(buf).map_err(|_| StoreError::BadString)
}

/// Write rows as EMB1; returns the number of rows written. All rows must
/// share one dimension. An empty slice produces a valid file with count 0.
pub fn save_embeddings(
    rows: &[LabeledEmbedding],
    path: impl AsRef<Path>,
) -> Result<usize, StoreError> {
    let dim = rows.first().map(|r| r.embedding.dim()).unwrap_or(0);
    for r in rows {
        if r.embedding.dim() != dim {
            return Err(StoreError::DimMismatch { expected: dim, got: r.embedding.dim() });
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(EMB1_MAGIC)?;
    w.write_u32::<LittleEndian>(dim as u32)?;
    w.write_u32::<LittleEndian>(rows.len() as u32)?;
    for r in rows {
        write_str(&mut w, &r.speaker_id)?;
        write_str(&mut w, &r.utterance_id)?;
        w.write_u8(r.emotion.code())?;
        write_str(&mut w, r.sentence_id.as_deref().unwrap_or(""))?;
        for &v in &r.embedding.values {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(rows.len())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<LabeledEmbedding>, StoreError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(map_eof)?;
    if &magic != EMB1_MAGIC {
        return Err(StoreError::BadMagic);
    }
    let dim = r.read_u32::<LittleEndian>().map_err(map_eof)? as usize;
    let count = r.read_u32::<LittleEndian>().map_err(map_eof)? as usize;
    let mut rows = Vec::with_capacity(count);
    for _ in 0..count {
        let speaker_id = read_str(&mut r)?;
        let utterance_id = read_str(&mut r)?;
        let code = r.read_u8().map_err(map_eof)?;
        let emotion = EmotionLabel::from_code(code).ok_or(StoreError::BadLabel(code))?;
        let sentence = read_str(&mut r)?;
        let mut values = vec![0.0f32; dim];
        for v in &mut values {
            *v = r.read_f32::<LittleEndian>().map_err(map_eof)?;
        }
        rows.push(LabeledEmbedding {
            embedding: Embedding::new(values),
            speaker_id,
            utterance_id,
            emotion,
            sentence_id: if sentence.is_empty() { None } else { Some(sentence) },
        });
    }
    Ok(rows)
}

/// CSV export with header `speaker_id,utterance_id,emotion,sentence_id,v0..v{dim-1}`.
pub fn export_csv(rows: &[LabeledEmbedding], path: impl AsRef<Path>) -> Result<(), StoreError> {
    let dim = rows.first().map(|r| r.embedding.dim()).unwrap_or(0);
    for r in rows {
        if r.embedding.dim() != dim {
            return Err(StoreError::DimMismatch { expected: dim, got: r.embedding.dim() });
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "speaker_id".to_string(),
        "utterance_id".to_string(),
        "emotion".to_string(),
        "sentence_id".to_string(),
    ];
    header.extend((0..dim).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.speaker_id.clone(),
            r.utterance_id.clone(),
            r.emotion.to_string(),
            r.sentence_id.clone().unwrap_or_default(),
        ];
        rec.extend(r.embedding.values.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn row(spk: &str, utt: &str, emotion: EmotionLabel, values: Vec<f32>) -> LabeledEmbedding {
        LabeledEmbedding {
            embedding: Embedding::new(values),
            speaker_id: spk.into(),
            utterance_id: utt.into(),
            emotion,
            sentence_id: Some("s01".into()),
        }
    }

    #[test]
    fn roundtrip_three_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.emb1");
        let rows = vec![
            row("a", "a_1", EmotionLabel::Angry, vec![0.1, 0.2]),
            row("a", "a_2", EmotionLabel::Sad, vec![-0.5, 1.0]),
            LabeledEmbedding { sentence_id: None, ..row("b", "b_1", EmotionLabel::Neutral, vec![0.0, 0.25]) },
        ];
        assert_eq!(save_embeddings(&rows, &path).unwrap(), 3);
        let loaded = load_embeddings(&path).unwrap();
        assert_eq!(loaded, rows);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.emb1");
        std::fs::write(&path, b"NOPE\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        assert!(matches!(load_embeddings(&path), Err(StoreError::BadMagic)));
    }

    #[test]
    fn empty_file_roundtrips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.emb1");
        assert_eq!(save_embeddings(&[], &path).unwrap(), 0);
        assert!(load_embeddings(&path).unwrap().is_empty());
    }

    #[test]
    fn truncated_file_is_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.emb1");
        let rows = vec![row("a", "a_1", EmotionLabel::Happy, vec![0.1, 0.2, 0.3])];
        save_embeddings(&rows, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_embeddings(&path), Err(StoreError::TruncatedFile)));
    }

    #[test]
    fn mixed_dims_are_rejected_on_save() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.emb1");
        let rows = vec![
            row("a", "a_1", EmotionLabel::Angry, vec![0.1, 0.2]),
            row("a", "a_2", EmotionLabel::Angry, vec![0.1]),
        ];
        assert!(matches!(save_embeddings(&rows, &path), Err(StoreError::DimMismatch { .. })));
    }

    #[test]
    fn csv_export_has_expected_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let rows = vec![row("a", "a_1", EmotionLabel::Angry, vec![0.5, -0.25])];
        export_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "speaker_id,utterance_id,emotion,sentence_id,v0,v1");
        assert_eq!(lines.next().unwrap(), "a,a_1,Angry,s01,0.5,-0.25");
    }
}
