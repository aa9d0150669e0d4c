use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Embedding, NliError};

/// Turns sentences into fixed-size vectors. Output order matches input order
/// and the same text always maps to the same vector.
pub trait EncoderBackend: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, NliError>;
}

impl<E: EncoderBackend + ?Sized> EncoderBackend for Arc<E> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, NliError> {
        (**self).encode_batch(texts)
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub const DEFAULT_HASH_DIM: usize = 256;

/// Signed feature hashing of lower-cased word unigrams and bigrams,
/// L2-normalized. Needs no model files.
#[derive(Debug, Clone)]
pub struct HashEncoder {
    dim: usize,
    name: String,
}

impl HashEncoder {
    pub fn new(dim: usize) -> HashEncoder {
        assert!(dim > 0, "hash encoder dimension must be positive");
        HashEncoder {
            dim,
            name: format!("hash:{dim}"),
        }
    }

    pub fn encode(&self, text: &str) -> Embedding {
        let mut v = vec![0.0; self.dim];
        let words = words(text);
        let mut add = |feature: &str| {
            let h = fnv1a(feature.as_bytes());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        };
        for w in &words {
            add(w);
        }
        for pair in words.windows(2) {
            add(&format!("{} {}", pair[0], pair[1]));
        }
        l2_normalize(&mut v);
        Embedding(v)
    }
}

impl Default for HashEncoder {
    fn default() -> Self {
        Self::new(DEFAULT_HASH_DIM)
    }
}

impl EncoderBackend for HashEncoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, NliError> {
        Ok(texts.iter().map(|t| self.encode(t)).collect())
    }
}

/// Mean-pooled word vectors loaded from an exported text file
/// (`word v1 v2 ... vd` per line, optional `count dim` header), then
/// L2-normalized. Sentences with no known word map to the zero vector.
#[derive(Debug, Clone)]
pub struct VectorEncoder {
    name: String,
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl VectorEncoder {
    pub fn load(path: impl AsRef<Path>) -> Result<VectorEncoder, NliError> {
        let path = path.as_ref();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
            let values = values.map_err(|e| NliError::WeightFile(format!("{}:{}: {e}", path.display(), i + 1)))?;
            if i == 0 && values.len() == 1 && word.parse::<usize>().is_ok() {
                continue; // word2vec-style header
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(NliError::WeightFile(format!(
                        "{}:{}: expected {d} values, found {}",
                        path.display(),
                        i + 1,
                        values.len()
                    )))
                }
                _ => {}
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(NliError::WeightFile(format!(
                    "{}:{}: non-finite value",
                    path.display(),
                    i + 1
                )));
            }
            vectors.insert(word.to_lowercase(), values);
        }
        let dim = dim
            .filter(|&d| d > 0)
            .ok_or_else(|| NliError::WeightFile(format!("{}: no vectors", path.display())))?;
        Ok(VectorEncoder {
            name: format!("vectors:{}", path.display()),
            dim,
            vectors,
        })
    }
}

impl EncoderBackend for VectorEncoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, NliError> {
        Ok(texts
            .iter()
            .map(|t| {
                let mut v = vec![0.0; self.dim];
                let mut n = 0usize;
                for w in words(t) {
                    if let Some(wv) = self.vectors.get(&w) {
                        v.iter_mut().zip(wv).for_each(|(a, b)| *a += b);
                        n += 1;
                    }
                }
                if n > 0 {
                    v.iter_mut().for_each(|a| *a /= n as f64);
                }
                l2_normalize(&mut v);
                Embedding(v)
            })
            .collect())
    }
}

/// Value of the `nli.encoder` configuration key: `hash`, `hash:<dim>` or
/// `vectors:<path>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EncoderSpec {
    Hash(usize),
    Vectors(PathBuf),
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec::Hash(DEFAULT_HASH_DIM)
    }
}

impl FromStr for EncoderSpec {
    type Err = NliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "hash" {
            return Ok(EncoderSpec::Hash(DEFAULT_HASH_DIM));
        }
        if let Some(d) = s.strip_prefix("hash:") {
            return match d.parse::<usize>() {
                Ok(d) if d > 0 => Ok(EncoderSpec::Hash(d)),
                _ => Err(NliError::Encoder(format!("bad hash dimension in {s:?}"))),
            };
        }
        if let Some(p) = s.strip_prefix("vectors:").filter(|p| !p.is_empty()) {
            return Ok(EncoderSpec::Vectors(PathBuf::from(p)));
        }
        Err(NliError::Encoder(format!("unknown encoder {s:?}")))
    }
}

impl TryFrom<String> for EncoderSpec {
    type Error = NliError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<EncoderSpec> for String {
    fn from(s: EncoderSpec) -> String {
        s.to_string()
    }
}

impl fmt::Display for EncoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderSpec::Hash(d) => write!(f, "hash:{d}"),
            EncoderSpec::Vectors(p) => write!(f, "vectors:{}", p.display()),
        }
    }
}

impl EncoderSpec {
    pub fn load(&self) -> Result<Arc<dyn EncoderBackend>, NliError> {
        Ok(match self {
            EncoderSpec::Hash(d) => Arc::new(HashEncoder::new(*d)),
            EncoderSpec::Vectors(p) => Arc::new(VectorEncoder::load(p)?),
        })
    }
}
