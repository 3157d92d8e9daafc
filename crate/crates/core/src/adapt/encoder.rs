use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::AdaptError;
use crate::embed_store::write_atomic;

pub const UNKNOWN_TOKEN: &str = "<unk>";
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CARECKP1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Lowercase and split on whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Token → row index. Index 0 is always the unknown-token slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Build from every token in `texts`, sorted so the result does not
    /// depend on input order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut tokens: Vec<String> = texts.into_iter().flat_map(tokenize).collect();
        tokens.sort_unstable();
        tokens.dedup();
        tokens.retain(|t| t != UNKNOWN_TOKEN);
        Self::from_tokens(std::iter::once(UNKNOWN_TOKEN.to_string()).chain(tokens).collect())
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Row ids for `text`; unknown tokens map to slot 0 and text with no
    /// tokens maps to a single unknown token.
    pub fn ids(&self, text: &str) -> Vec<usize> {
        let ids: Vec<usize> = tokenize(text)
            .iter()
            .map(|t| self.get(t).unwrap_or(0))
            .collect();
        if ids.is_empty() {
            vec![0]
        } else {
            ids
        }
    }
}

/// Mean-pooled token table followed by a square linear projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    pub vocab: Vocab,
    /// V×d, row-major.
    pub token_table: Vec<f64>,
    /// d×d, row-major; embedding = projection · pooled.
    pub projection: Vec<f64>,
    pub dim: usize,
}

impl ToyEncoder {
    /// Parameters drawn uniformly from `[-scale, scale]`.
    pub fn random(vocab: Vocab, dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let v = vocab.len();
        let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-scale..=scale)).collect::<Vec<_>>();
        let token_table = draw(v * dim);
        let projection = draw(dim * dim);
        Self {
            vocab,
            token_table,
            projection,
            dim,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn token_row(&self, id: usize) -> &[f64] {
        &self.token_table[id * self.dim..(id + 1) * self.dim]
    }

    /// Mean of the token rows. Rows are summed in id order so the result is
    /// bit-identical for any permutation of `ids`.
    pub fn pool(&self, ids: &[usize]) -> Vec<f64> {
        let mut sorted = ids.to_vec();
        sorted.sort_unstable();
        let mut u = vec![0.0; self.dim];
        for &id in &sorted {
            for (acc, x) in u.iter_mut().zip(self.token_row(id)) {
                *acc += x;
            }
        }
        let n = ids.len() as f64;
        u.iter_mut().for_each(|x| *x /= n);
        u
    }

    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        self.projection
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn encode_ids(&self, ids: &[usize]) -> Vec<f64> {
        self.project(&self.pool(ids))
    }

    pub fn encode(&self, text: &str) -> Vec<f64> {
        self.encode_ids(&self.vocab.ids(text))
    }

    pub fn parameters_finite(&self) -> bool {
        self.token_table.iter().chain(&self.projection).all(|x| x.is_finite())
    }

    /// Checkpoint layout (little-endian): magic `CARECKP1`, `u32` version,
    /// `u32` V, `u32` d, then V tokens each as `u32` byte length + UTF-8,
    /// then the V×d token table and d×d projection as row-major `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.vocab.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for t in self.vocab.tokens() {
            buf.extend_from_slice(&(t.len() as u32).to_le_bytes());
            buf.extend_from_slice(t.as_bytes());
        }
        for x in self.token_table.iter().chain(&self.projection) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AdaptError> {
        let mut r = bytes;
        let bad = |m: &str| AdaptError::Checkpoint(m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |r: &mut &[u8]| -> Result<u32, AdaptError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            Ok(u32::from_le_bytes(b))
        };
        let version = u32_at(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(AdaptError::Checkpoint(format!("unsupported version {version}")));
        }
        let v = u32_at(&mut r)? as usize;
        let dim = u32_at(&mut r)? as usize;
        if v == 0 || dim == 0 {
            return Err(bad("empty vocabulary or zero width"));
        }
        let mut tokens = Vec::with_capacity(v);
        for _ in 0..v {
            let len = u32_at(&mut r)? as usize;
            if r.len() < len {
                return Err(bad("truncated vocabulary"));
            }
            let (t, rest) = r.split_at(len);
            tokens.push(String::from_utf8(t.to_vec()).map_err(|_| bad("token is not UTF-8"))?);
            r = rest;
        }
        let want = (v * dim + dim * dim) * 8;
        if r.len() != want {
            return Err(AdaptError::Checkpoint(format!(
                "parameter payload is {} bytes, expected {want}",
                r.len()
            )));
        }
        let values: Vec<f64> = r
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (table, proj) = values.split_at(v * dim);
        let enc = Self {
            vocab: Vocab::from_tokens(tokens),
            token_table: table.to_vec(),
            projection: proj.to_vec(),
            dim,
        };
        if !enc.parameters_finite() {
            return Err(bad("non-finite parameter"));
        }
        Ok(enc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AdaptError> {
        let path = path.as_ref();
        write_atomic(path, &self.to_bytes()).map_err(|e| AdaptError::Io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AdaptError> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| AdaptError::Io(path.display().to_string(), e))?;
        Self::from_bytes(&bytes)
    }
}
