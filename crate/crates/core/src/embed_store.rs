//! Embedding matrices, the `CAREEMB1` on-disk format, and cosine similarity.
//!
//! Data file layout (all little-endian):
//!
//! | offset | size      | content                                   |
//! |--------|-----------|-------------------------------------------|
//! | 0      | 8         | magic `CAREEMB1`                          |
//! | 8      | 4         | `u32` row count N                         |
//! | 12     | 4         | `u32` column count D                      |
//! | 16     | 4·N·D     | `f32` values, row-major                   |
//!
//! Row ids live in a sidecar UTF-8 file, one id per line, in row order.
//!
//! Values are held in memory as `f64` and all arithmetic runs in double
//! precision. Writing rounds each value to the nearest `f32`, so a matrix
//! read from disk survives any number of write/read cycles bit-for-bit.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"CAREEMB1";
pub const HEADER_LEN: usize = 16;

/// Allowed deviation of a normalized row's norm from 1.
pub const UNIT_NORM_TOL: f64 = 1e-6;

const QUERY_BLOCK: usize = 16;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected CAREEMB1")]
    BadMagic,
    #[error("payload is {actual} bytes but header N={rows}, D={cols} requires {expected}")]
    PayloadSize {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },
    #[error("ids file lists {ids} ids but matrix has {rows} rows")]
    IdCount { ids: usize, rows: usize },
    #[error("matrix must have at least one row")]
    NoRows,
    #[error("matrix must have at least one column")]
    NoCols,
    #[error("data length {len} is not {rows}x{cols}")]
    Shape { len: usize, rows: usize, cols: usize },
    #[error("duplicate row id \"{0}\"")]
    DuplicateId(String),
    #[error("row id {0:?} is empty or contains a line break")]
    BadId(String),
    #[error("non-finite value at row \"{id}\", column {col}")]
    NonFinite { id: String, col: usize },
    #[error("row \"{0}\" has zero norm")]
    ZeroRow(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("matrix too large for the u32 header")]
    TooLarge,
}

/// An N×D matrix of row embeddings keyed by unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    data: Vec<f64>,
    dim: usize,
    normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, data: Vec<f64>, dim: usize) -> Result<Self, EmbedError> {
        if ids.is_empty() {
            return Err(EmbedError::NoRows);
        }
        if dim == 0 {
            return Err(EmbedError::NoCols);
        }
        if data.len() != ids.len() * dim {
            return Err(EmbedError::Shape {
                len: data.len(),
                rows: ids.len(),
                cols: dim,
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if id.is_empty() || id.contains(['\n', '\r']) {
                return Err(EmbedError::BadId(id.clone()));
            }
            if !seen.insert(id.as_str()) {
                return Err(EmbedError::DuplicateId(id.clone()));
            }
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite {
                id: ids[pos / dim].clone(),
                col: pos % dim,
            });
        }
        Ok(Self {
            ids,
            data,
            dim,
            normalized: false,
        })
    }

    /// Build from row vectors; every row must have the same length.
    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, EmbedError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(EmbedError::DimMismatch {
                left: dim,
                right: bad.len(),
            });
        }
        Self::new(ids, rows.concat(), dim)
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, EmbedError> {
        Self::new(
            self.ids.clone(),
            self.data.iter().map(|v| v * factor).collect(),
            self.dim,
        )
    }

    /// Rows reordered by `order` (a permutation of row indices).
    pub fn select_rows(&self, order: &[usize]) -> Result<Self, EmbedError> {
        let ids = order.iter().map(|&i| self.ids[i].clone()).collect();
        let data = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let mut m = Self::new(ids, data, self.dim)?;
        m.normalized = self.normalized;
        Ok(m)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbedError + '_ {
    move |source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn encode_data(m: &EmbeddingMatrix) -> Result<Vec<u8>, EmbedError> {
    let rows = u32::try_from(m.rows()).map_err(|_| EmbedError::TooLarge)?;
    let cols = u32::try_from(m.dim()).map_err(|_| EmbedError::TooLarge)?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * m.data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for &v in &m.data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(buf)
}

/// Parse a data file body; returns (rows, cols, values).
pub fn decode_data(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), EmbedError> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(EmbedError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(EmbedError::PayloadSize {
            rows: 0,
            cols: 0,
            expected: 0,
            actual: bytes.len().saturating_sub(8),
        });
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or(EmbedError::TooLarge)?;
    if payload.len() != expected {
        return Err(EmbedError::PayloadSize {
            rows,
            cols,
            expected,
            actual: payload.len(),
        });
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((rows, cols, values))
}

/// Default id sidecar for a data file: the same path with `.ids` appended.
pub fn default_ids_path(data_path: impl AsRef<Path>) -> PathBuf {
    let mut s = data_path.as_ref().as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

pub fn read_embeddings(
    data_path: impl AsRef<Path>,
    ids_path: impl AsRef<Path>,
) -> Result<EmbeddingMatrix, EmbedError> {
    let (data_path, ids_path) = (data_path.as_ref(), ids_path.as_ref());
    let bytes = fs::read(data_path).map_err(io_err(data_path))?;
    let (rows, cols, values) = decode_data(&bytes)?;
    let ids_text = fs::read_to_string(ids_path).map_err(io_err(ids_path))?;
    let ids: Vec<String> = ids_text.lines().map(str::to_owned).collect();
    if ids.len() != rows {
        return Err(EmbedError::IdCount {
            ids: ids.len(),
            rows,
        });
    }
    EmbeddingMatrix::new(ids, values, cols)
}

/// Write `bytes` to `path` via a sibling temp file and rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_embeddings(
    m: &EmbeddingMatrix,
    data_path: impl AsRef<Path>,
    ids_path: impl AsRef<Path>,
) -> Result<(), EmbedError> {
    let (data_path, ids_path) = (data_path.as_ref(), ids_path.as_ref());
    let bytes = encode_data(m)?;
    let mut ids = m.ids.join("\n");
    ids.push('\n');
    write_atomic(data_path, &bytes).map_err(io_err(data_path))?;
    write_atomic(ids_path, ids.as_bytes()).map_err(io_err(ids_path))?;
    Ok(())
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dot product with eight interleaved partial sums so the loop vectorizes.
/// The summation order is fixed, so the result is deterministic.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

pub fn l2_normalize(m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, EmbedError> {
    let mut data = m.data.clone();
    for (i, row) in data.chunks_exact_mut(m.dim).enumerate() {
        let n = norm(row);
        if n == 0.0 {
            return Err(EmbedError::ZeroRow(m.ids[i].clone()));
        }
        row.iter_mut().for_each(|v| *v /= n);
    }
    Ok(EmbeddingMatrix {
        ids: m.ids.clone(),
        data,
        dim: m.dim,
        normalized: true,
    })
}

fn ensure_normalized(m: &EmbeddingMatrix) -> Result<std::borrow::Cow<'_, EmbeddingMatrix>, EmbedError> {
    if m.normalized {
        Ok(std::borrow::Cow::Borrowed(m))
    } else {
        l2_normalize(m).map(std::borrow::Cow::Owned)
    }
}

/// Cosine similarities between every query row and every gallery row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn transpose(&self) -> SimilarityMatrix {
        let (r, c) = (self.rows.len(), self.cols.len());
        let mut values = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                values[j * r + i] = self.values[i * c + j];
            }
        }
        SimilarityMatrix {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            values,
        }
    }
}

/// Each entry is computed by the same sequential dot product whether or not
/// rows are processed in parallel, so results do not depend on thread count.
pub fn similarity_matrix(
    queries: &EmbeddingMatrix,
    gallery: &EmbeddingMatrix,
) -> Result<SimilarityMatrix, EmbedError> {
    if queries.dim != gallery.dim {
        return Err(EmbedError::DimMismatch {
            left: queries.dim,
            right: gallery.dim,
        });
    }
    let q = ensure_normalized(queries)?;
    let g = ensure_normalized(gallery)?;
    let cols = g.rows();
    let mut values = vec![0.0; q.rows() * cols];
    // Blocks of query rows stay cache-resident while the gallery streams past.
    values
        .par_chunks_mut(cols * QUERY_BLOCK)
        .enumerate()
        .for_each(|(b, out)| {
            let first = b * QUERY_BLOCK;
            let block = out.len() / cols;
            for j in 0..cols {
                let gj = g.row(j);
                for i in 0..block {
                    out[i * cols + j] = dot(q.row(first + i), gj);
                }
            }
        });
    Ok(SimilarityMatrix {
        rows: q.ids.clone(),
        cols: g.ids.clone(),
        values,
    })
}
