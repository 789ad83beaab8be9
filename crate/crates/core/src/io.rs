//! Matrix and label files.
//!
//! Embeddings are stored either as CSV (one row per sample, no header) or
//! in a little-endian binary block:
//!
//! ```text
//! b"MLL1" | n: u64 | d: u64 | n·d × f64 (row-major)
//! ```
//!
//! Labels are one non-negative integer per line; blank lines are ignored.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::{LabelVector, Matrix};

pub const MAGIC: &[u8; 4] = b"MLL1";

/// Reads a matrix, choosing the format from the leading bytes.
pub fn read_matrix(path: &Path) -> Result<Matrix<f64>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)
    } else {
        read_csv(bytes.as_slice())
    }
}

/// Writes a matrix; paths ending in `.bin` get the binary format.
pub fn write_matrix(path: &Path, m: &Matrix<f64>) -> Result<()> {
    let bytes = if path.extension().is_some_and(|e| e == "bin") {
        encode_binary(m)
    } else {
        let mut buf = Vec::new();
        write_csv(&mut buf, m)?;
        buf
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Matrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("CSV row {}: {e}", i + 1)))?;
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Format(format!(
                    "CSV row {} has {} fields, expected {c}",
                    i + 1,
                    rec.len()
                )))
            }
            _ => {}
        }
        for field in &rec {
            let v: f64 = field.parse().map_err(|_| {
                Error::Format(format!("CSV row {}: '{field}' is not a number", i + 1))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format("CSV file has no rows".into()))?;
    Matrix::new(rows, cols, data)
}

pub fn write_csv<W: Write>(w: W, m: &Matrix<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in m.row_iter() {
        wtr.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn encode_binary(m: &Matrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Matrix<f64>> {
    let body = bytes
        .strip_prefix(MAGIC.as_slice())
        .ok_or_else(|| Error::Format("missing MLL1 magic".into()))?;
    if body.len() < 16 {
        return Err(Error::Format("truncated MLL1 header".into()));
    }
    let word = |i: usize| u64::from_le_bytes(body[i..i + 8].try_into().expect("8 bytes"));
    let (n, d) = (word(0), word(8));
    let len = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| usize::try_from(b).ok())
        .ok_or_else(|| Error::Format(format!("MLL1 shape {n}x{d} overflows")))?;
    let payload = &body[16..];
    if payload.len() != len {
        return Err(Error::Format(format!(
            "MLL1 payload has {} bytes, {n}x{d} needs {len}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Matrix::new(n as usize, d as usize, data)
}

/// Reads raw labels, one per line.
pub fn read_labels<R: Read>(r: R) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse().map_err(|_| {
            Error::Format(format!(
                "label line {}: '{t}' is not a non-negative integer",
                i + 1
            ))
        })?);
    }
    Ok(out)
}

/// Reads a label file with the class count taken from the largest label.
pub fn read_label_file(path: &Path) -> Result<LabelVector> {
    LabelVector::from_labels(read_labels(fs::File::open(path)?)?)
}

pub fn write_labels<W: Write>(mut w: W, y: &LabelVector) -> Result<()> {
    for l in y.as_slice() {
        writeln!(w, "{l}")?;
    }
    Ok(())
}
