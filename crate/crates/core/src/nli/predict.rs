use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use lru::LruCache;
use parking_lot::Mutex;

use super::{combine, Embedding, EncoderBackend, NliError, NliHead};
use crate::evalkit::{Profiler, Stage};
use crate::types::{Claim, EvidenceSentence, SentencePrediction};

pub const DEFAULT_BATCH_SIZE: usize = 32;

/// Hypothesis embeddings keyed by cleaned sentence text.
pub struct EmbeddingCache {
    inner: Mutex<LruCache<String, Embedding>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl EmbeddingCache {
    pub fn new(capacity: usize) -> EmbeddingCache {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("non-zero");
        EmbeddingCache {
            inner: Mutex::new(LruCache::new(cap)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn get(&self, text: &str) -> Option<Embedding> {
        let found = self.inner.lock().get(text).cloned();
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    pub fn insert(&self, text: String, emb: Embedding) {
        self.inner.lock().put(text, emb);
    }

    pub fn len(&self) -> usize {
        self.inner.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

impl Default for EmbeddingCache {
    fn default() -> Self {
        EmbeddingCache::new(10_000)
    }
}

/// Cumulative encoder traffic of a [`Predictor`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PredictorStats {
    pub claim_encodings: u64,
    pub hypothesis_batches: u64,
    pub hypotheses_encoded: u64,
}

/// Encoder, trained head and embedding cache bundled for inference. Safe to
/// share between tasks.
pub struct Predictor {
    encoder: Arc<dyn EncoderBackend>,
    head: Arc<NliHead>,
    cache: Arc<EmbeddingCache>,
    batch_size: usize,
    claim_encodings: AtomicU64,
    hypothesis_batches: AtomicU64,
    hypotheses_encoded: AtomicU64,
}

impl Predictor {
    pub fn new(encoder: Arc<dyn EncoderBackend>, head: Arc<NliHead>) -> Result<Predictor, NliError> {
        if head.dim != encoder.dim() {
            return Err(NliError::DimMismatch {
                expected: head.dim,
                got: encoder.dim(),
            });
        }
        Ok(Predictor {
            encoder,
            head,
            cache: Arc::new(EmbeddingCache::default()),
            batch_size: DEFAULT_BATCH_SIZE,
            claim_encodings: AtomicU64::new(0),
            hypothesis_batches: AtomicU64::new(0),
            hypotheses_encoded: AtomicU64::new(0),
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Predictor {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_cache(mut self, cache: Arc<EmbeddingCache>) -> Predictor {
        self.cache = cache;
        self
    }

    pub fn head(&self) -> &NliHead {
        &self.head
    }

    pub fn encoder(&self) -> &dyn EncoderBackend {
        self.encoder.as_ref()
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn stats(&self) -> PredictorStats {
        PredictorStats {
            claim_encodings: self.claim_encodings.load(Ordering::Relaxed),
            hypothesis_batches: self.hypothesis_batches.load(Ordering::Relaxed),
            hypotheses_encoded: self.hypotheses_encoded.load(Ordering::Relaxed),
        }
    }

    fn encode(&self, texts: &[&str]) -> Result<Vec<Embedding>, NliError> {
        let out = self.encoder.encode_batch(texts)?;
        if out.len() != texts.len() {
            return Err(NliError::Encoder(format!(
                "encoder returned {} vectors for {} texts",
                out.len(),
                texts.len()
            )));
        }
        if let Some(bad) = out.iter().find(|e| e.dim() != self.head.dim) {
            return Err(NliError::DimMismatch {
                expected: self.head.dim,
                got: bad.dim(),
            });
        }
        Ok(out)
    }

    /// Scores every hypothesis against the claim. The claim is encoded once,
    /// uncached hypotheses are encoded in batches, and the output keeps the
    /// input order.
    pub fn predict_claim(
        &self,
        claim: &Claim,
        hypotheses: &[EvidenceSentence],
        profiler: &mut Profiler,
    ) -> Result<Vec<SentencePrediction>, NliError> {
        if hypotheses.is_empty() {
            return Ok(Vec::new());
        }

        let u = profiler.time(Stage::EmbeddingClaim, || {
            self.claim_encodings.fetch_add(1, Ordering::Relaxed);
            self.encode(&[claim.text.as_str()]).map(|mut v| v.remove(0))
        })?;

        let embeddings = profiler.time(Stage::EmbeddingHypothesis, || self.hypothesis_embeddings(hypotheses))?;

        profiler.time(Stage::Classification, || {
            hypotheses
                .iter()
                .zip(embeddings)
                .map(|(h, v)| {
                    Ok(SentencePrediction::new(
                        h.clone(),
                        self.head.forward(&combine(&u, &v)?)?,
                    ))
                })
                .collect()
        })
    }

    fn hypothesis_embeddings(&self, hypotheses: &[EvidenceSentence]) -> Result<Vec<Embedding>, NliError> {
        let mut slots: Vec<Option<Embedding>> = Vec::with_capacity(hypotheses.len());
        let mut pending: Vec<&str> = Vec::new();
        for h in hypotheses {
            let text = h.cleaned_text.as_str();
            let cached = self.cache.get(text);
            if cached.is_none() && !pending.contains(&text) {
                pending.push(text);
            }
            slots.push(cached);
        }

        for batch in pending.chunks(self.batch_size) {
            self.hypothesis_batches.fetch_add(1, Ordering::Relaxed);
            self.hypotheses_encoded.fetch_add(batch.len() as u64, Ordering::Relaxed);
            for (text, emb) in batch.iter().zip(self.encode(batch)?) {
                self.cache.insert(text.to_string(), emb);
            }
        }

        slots
            .into_iter()
            .zip(hypotheses)
            .map(|(slot, h)| match slot {
                Some(e) => Ok(e),
                None => self
                    .cache
                    .inner
                    .lock()
                    .peek(&h.cleaned_text)
                    .cloned()
                    .ok_or_else(|| NliError::Encoder("embedding cache too small for one claim".into())),
            })
            .collect()
    }
}

/// One-shot form of [`Predictor::predict_claim`] with a caller-owned cache.
pub fn predict_claim(
    claim: &Claim,
    hypotheses: &[EvidenceSentence],
    encoder: Arc<dyn EncoderBackend>,
    head: Arc<NliHead>,
    cache: Arc<EmbeddingCache>,
    batch_size: usize,
) -> Result<Vec<SentencePrediction>, NliError> {
    Predictor::new(encoder, head)?
        .with_cache(cache)
        .with_batch_size(batch_size)
        .predict_claim(claim, hypotheses, &mut Profiler::new())
}
