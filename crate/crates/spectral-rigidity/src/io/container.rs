//! The `CCA1` binary matrix container, plain-text matrices, and chain
//! manifests.
//!
//! Container layout, all little-endian:
//!
//! ```text
//! bytes 0..4    magic "CCA1"
//! bytes 4..12   rows as u64
//! bytes 12..20  cols as u64
//! bytes 20..    rows * cols * 8 bytes of f64 payload, row major
//! ```
//!
//! Text matrices are whitespace-separated rows, one matrix row per line.
//! A manifest lists one matrix path per line (relative paths resolve
//! against the manifest's directory); `#` starts a comment.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::chain::LayerChain;
use crate::error::{Error, Result};
use crate::Tolerances;

const MAGIC: &[u8; 4] = b"CCA1";

/// Serialize a matrix into the container layout.
pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut bytes = Vec::with_capacity(20 + rows * cols * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(rows as u64).to_le_bytes());
    bytes.extend_from_slice(&(cols as u64).to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            bytes.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    bytes
}

/// Parse the container layout.
pub fn decode_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < 20 || &bytes[0..4] != MAGIC {
        return Err(Error::Container("bad magic: expected CCA1 header".into()));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let expected = 20 + rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Container("shape overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Container(format!(
            "payload size mismatch: {} bytes for {rows}x{cols}",
            bytes.len() - 20
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Container("empty matrix".into()));
    }
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    let mut offset = 20;
    for i in 0..rows {
        for j in 0..cols {
            let v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry(i, j));
            }
            m[(i, j)] = v;
            offset += 8;
        }
    }
    Ok(m)
}

/// Write a matrix container to disk.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    Ok(fs::write(path, encode_matrix(m))?)
}

fn parse_text_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| {
                Error::Container(format!("line {}: bad number {token:?}", line_no + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry(rows.len(), row.len()));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Container(format!(
                    "line {}: row length {} differs from {}",
                    line_no + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Container("no rows in text matrix".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Read a matrix from disk: container files are detected by their magic,
/// anything else is parsed as whitespace-separated text.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() >= 4 && &bytes[0..4] == MAGIC {
        decode_matrix(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Container(format!("{}: neither CCA1 nor text", path.display())))?;
        parse_text_matrix(&text)
    }
}

/// Read a manifest of matrix paths.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p = PathBuf::from(line);
        out.push(if p.is_absolute() { p } else { base.join(p) });
    }
    if out.is_empty() {
        return Err(Error::Usage(format!(
            "manifest {} lists no matrices",
            path.display()
        )));
    }
    Ok(out)
}

/// Write a manifest listing the given file names.
pub fn write_manifest(path: &Path, names: &[String]) -> Result<()> {
    let mut text = String::from("# one matrix file per line, in chain order\n");
    for name in names {
        text.push_str(name);
        text.push('\n');
    }
    Ok(fs::write(path, text)?)
}

/// Load an ordered chain from matrix files: every matrix is zero-padded to
/// the common square width, regularized when `reg_epsilon > 0`, and
/// normalized per the flag.
pub fn load_chain(
    paths: &[PathBuf],
    normalize: bool,
    reg_epsilon: f64,
    tol: &Tolerances,
) -> Result<LayerChain> {
    if paths.is_empty() {
        return Err(Error::Usage("no input matrices given".into()));
    }
    let raw: Vec<DMatrix<f64>> = paths
        .iter()
        .map(|p| read_matrix(p))
        .collect::<Result<_>>()?;
    let d = raw
        .iter()
        .map(|m| m.nrows().max(m.ncols()))
        .max()
        .unwrap();
    let layers: Vec<DMatrix<f64>> = raw
        .iter()
        .map(|m| {
            let mut padded = DMatrix::<f64>::zeros(d, d);
            padded
                .view_mut((0, 0), (m.nrows(), m.ncols()))
                .copy_from(m);
            crate::chain::normalize_and_embed(&padded, reg_epsilon, false)
        })
        .collect::<Result<_>>()?;
    LayerChain::new(layers, normalize, tol)
}
