//! Claim verification over a wiki-style knowledge base.
//!
//! The pipeline has two levels. Level one turns a claim into search queries
//! (built from the named entities it mentions), runs them against a search
//! backend and fetches the candidate articles. Level two splits the
//! articles into sentences and classifies every claim/sentence pair with a
//! Siamese NLI model over `[u; v; |u - v|]` sentence-embedding features.
//!
//! Alongside the pipeline live the dataset tools used to build training
//! pairs (FEVER ingestion, negative sampling, filtering) and the evaluation
//! metrics used to validate it.

pub mod datasets;
pub mod evalkit;
pub mod nli;
pub mod query;
pub mod retrieval;
pub mod textproc;
pub mod types;
pub mod wikiclient;

pub use types::{
    parse_label, Claim, EmptyClaim, EvidenceRef, EvidenceSentence, LabelProbs, LabeledPair, NliLabel,
    SentencePrediction, StageTimings, UnknownLabel, Verdict,
};
