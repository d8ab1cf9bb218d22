//! SVM1 model container.
//!
//! Little-endian layout: magic `SVM1`, u8 kind (0 = binary, 1 = multiclass).
//! Binary payload: u32 dim, f64 gamma, f64 bias, u32 sv count, sv count f64
//! dual coefficients, then sv count * dim f32 support-vector values.
//! Multiclass: u8 class count, the class codes, u32 pair count, then per pair
//! u8 class_a, u8 class_b and an embedded binary payload.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BinarySvmModel, MulticlassSvmModel, PairwiseModel, SvmError};
use crate::embed::Embedding;

pub const SVM1_MAGIC: &[u8; 4] = b"SVM1";
const KIND_BINARY: u8 = 0;
const KIND_MULTICLASS: u8 = 1;

fn map_eof(e: std::io::Error) -> SvmError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        SvmError::TruncatedFile
    } else {
        SvmError::Io(e)
    }
}

fn write_binary_payload<W: Write>(w: &mut W, model: &BinarySvmModel) -> Result<(), SvmError> {
    w.write_u32::<LittleEndian>(model.dim() as u32)?;
    w.write_f64::<LittleEndian>(model.gamma)?;
    w.write_f64::<LittleEndian>(model.bias)?;
    w.write_u32::<LittleEndian>(model.support_vectors.len() as u32)?;
    for &c in &model.dual_coefs {
        w.write_f64::<LittleEndian>(c)?;
    }
    for sv in &model.support_vectors {
        for &v in &sv.values {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

fn read_binary_payload<R: Read>(r: &mut R) -> Result<BinarySvmModel, SvmError> {
    let dim = r.read_u32::<LittleEndian>().map_err(map_eof)? as usize;
    let gamma = r.read_f64::<LittleEndian>().map_err(map_eof)?;
    let bias = r.read_f64::<LittleEndian>().map_err(map_eof)?;
    let n_sv = r.read_u32::<LittleEndian>().map_err(map_eof)? as usize;
    let mut dual_coefs = Vec::with_capacity(n_sv);
    for _ in 0..n_sv {
        dual_coefs.push(r.read_f64::<LittleEndian>().map_err(map_eof)?);
    }
    let mut support_vectors = Vec::with_capacity(n_sv);
    for _ in 0..n_sv {
        let mut values = vec![0.0f32; dim];
        for v in &mut values {
            *v = r.read_f32::<LittleEndian>().map_err(map_eof)?;
        }
        support_vectors.push(Embedding::new(values));
    }
    Ok(BinarySvmModel { support_vectors, dual_coefs, bias, gamma })
}

pub fn save_binary(model: &BinarySvmModel, path: impl AsRef<Path>) -> Result<(), SvmError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SVM1_MAGIC)?;
    w.write_u8(KIND_BINARY)?;
    write_binary_payload(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<BinarySvmModel, SvmError> {
    let mut r = BufReader::new(File::open(path)?);
    check_header(&mut r, KIND_BINARY)?;
    read_binary_payload(&mut r)
}

pub fn save_multiclass(model: &MulticlassSvmModel, path: impl AsRef<Path>) -> Result<(), SvmError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SVM1_MAGIC)?;
    w.write_u8(KIND_MULTICLASS)?;
    w.write_u8(model.classes.len() as u8)?;
    for &c in &model.classes {
        w.write_u8(c)?;
    }
    w.write_u32::<LittleEndian>(model.pairwise.len() as u32)?;
    for pair in &model.pairwise {
        w.write_u8(pair.class_a)?;
        w.write_u8(pair.class_b)?;
        write_binary_payload(&mut w, &pair.model)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_multiclass(path: impl AsRef<Path>) -> Result<MulticlassSvmModel, SvmError> {
    let mut r = BufReader::new(File::open(path)?);
    check_header(&mut r, KIND_MULTICLASS)?;
    let k = r.read_u8().map_err(map_eof)? as usize;
    let mut classes = Vec::with_capacity(k);
    for _ in 0..k {
        classes.push(r.read_u8().map_err(map_eof)?);
    }
    let n_pairs = r.read_u32::<LittleEndian>().map_err(map_eof)? as usize;
    let mut pairwise = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let class_a = r.read_u8().map_err(map_eof)?;
        let class_b = r.read_u8().map_err(map_eof)?;
        if !classes.contains(&class_a) {
            return Err(SvmError::UnknownClass(class_a));
        }
        if !classes.contains(&class_b) {
            return Err(SvmError::UnknownClass(class_b));
        }
        let model = read_binary_payload(&mut r)?;
        pairwise.push(PairwiseModel { class_a, class_b, model });
    }
    Ok(MulticlassSvmModel { classes, pairwise })
}

fn check_header<R: Read>(r: &mut R, expected_kind: u8) -> Result<(), SvmError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(map_eof)?;
    if &magic != SVM1_MAGIC {
        return Err(SvmError::BadMagic);
    }
    let kind = r.read_u8().map_err(map_eof)?;
    if kind != expected_kind {
        return Err(SvmError::WrongKind(kind));
    }
    Ok(())
}
