use std::collections::HashMap;

use wikicheck::nli::{train_head, Embedding, EncoderBackend, NliError, TrainConfig, TrainedHead};
use wikicheck::textproc::collapse_whitespace;
use wikicheck::LabeledPair;

const ENCODE_CHUNK: usize = 256;

/// Encodes every distinct claim and hypothesis once, then fits a head on
/// the resulting embedding triples.
pub fn train_on_pairs(
    pairs: &[LabeledPair],
    encoder: &dyn EncoderBackend,
    cfg: &TrainConfig,
) -> Result<TrainedHead, NliError> {
    if pairs.is_empty() {
        return Err(NliError::EmptyTrainingSet);
    }
    let mut texts: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut id = |t: &str| {
        let t = collapse_whitespace(t);
        *index.entry(t.clone()).or_insert_with(|| {
            texts.push(t);
            texts.len() - 1
        })
    };
    let ids: Vec<(usize, usize)> = pairs
        .iter()
        .map(|p| (id(&p.claim_text), id(&p.hypothesis_text)))
        .collect();

    let mut embeddings: Vec<Embedding> = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(ENCODE_CHUNK) {
        let refs: Vec<&str> = chunk.iter().map(String::as_str).collect();
        embeddings.extend(encoder.encode_batch(&refs)?);
    }
    let triples: Vec<_> = ids
        .iter()
        .zip(pairs)
        .map(|(&(c, h), p)| (embeddings[c].clone(), embeddings[h].clone(), p.label))
        .collect();
    train_head(&triples, cfg)
}
