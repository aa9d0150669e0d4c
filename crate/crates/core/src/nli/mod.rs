//! Level two: sentence encoders, Siamese feature combination and the
//! trainable classification head.

mod encoder;
mod head;
mod predict;

pub use encoder::{EncoderBackend, EncoderSpec, HashEncoder, VectorEncoder, DEFAULT_HASH_DIM};
pub use head::{gradient_check, train_head, Activation, HeadGradients, NliHead, TrainConfig, TrainedHead};
pub use predict::{predict_claim, EmbeddingCache, Predictor, PredictorStats, DEFAULT_BATCH_SIZE};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum NliError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("embedding must be non-empty with finite entries")]
    InvalidEmbedding,
    #[error("encoder error: {0}")]
    Encoder(String),
    #[error("no training pairs")]
    EmptyTrainingSet,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("weight file: {0}")]
    WeightFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A fixed-length sentence vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Embedding, NliError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(NliError::InvalidEmbedding);
        }
        Ok(Embedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = NliError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Embedding::new(v)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Vec<f64> {
        e.0
    }
}

/// Siamese pair features `[u; v; |u - v|]`.
pub fn combine(u: &Embedding, v: &Embedding) -> Result<Vec<f64>, NliError> {
    if u.dim() != v.dim() {
        return Err(NliError::DimMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    let mut out = Vec::with_capacity(3 * u.dim());
    out.extend_from_slice(u.values());
    out.extend_from_slice(v.values());
    out.extend(u.values().iter().zip(v.values()).map(|(a, b)| (a - b).abs()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn combine_concatenates_with_abs_difference() {
        assert_eq!(
            combine(&emb(&[1.0, 2.0]), &emb(&[0.0, 5.0])).unwrap(),
            [1.0, 2.0, 0.0, 5.0, 1.0, 3.0]
        );
        let same = combine(&emb(&[0.3, -2.0]), &emb(&[0.3, -2.0])).unwrap();
        assert_eq!(&same[4..], [0.0, 0.0]);
        assert!(matches!(
            combine(&emb(&[1.0, 2.0]), &emb(&[1.0, 2.0, 3.0])),
            Err(NliError::DimMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn rejects_non_finite_embeddings() {
        assert!(Embedding::new(vec![]).is_err());
        assert!(Embedding::new(vec![1.0, f64::NAN]).is_err());
        assert!(serde_json::from_str::<Embedding>("[1.0, 2.0]").is_ok());
        assert!(serde_json::from_str::<Embedding>("[]").is_err());
    }

    proptest! {
        #[test]
        fn difference_block_is_symmetric(pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..10)) {
            let u = emb(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let v = emb(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let uv = combine(&u, &v).unwrap();
            let vu = combine(&v, &u).unwrap();
            let d = u.dim();
            prop_assert_eq!(&uv[2 * d..], &vu[2 * d..]);
            prop_assert_eq!(&uv[..d], &vu[d..2 * d]);
        }
    }
}
