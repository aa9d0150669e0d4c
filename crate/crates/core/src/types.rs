//! Shared domain vocabulary: labels, claims, evidence references, predictions
//! and verdicts. Every type here is an immutable value with a stable JSON
//! encoding (snake_case field names).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Three-way relation between a claim and a piece of evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NliLabel {
    #[serde(rename = "SUPPORTS")]
    Supports,
    #[serde(rename = "REFUTES")]
    Refutes,
    /// Not enough info. Also the answer whenever retrieval finds nothing.
    #[serde(rename = "NEI")]
    Nei,
}

impl NliLabel {
    /// All labels in tie-break order.
    pub const ALL: [NliLabel; 3] = [NliLabel::Supports, NliLabel::Refutes, NliLabel::Nei];

    /// Position of the label in probability vectors and confusion matrices.
    pub fn index(self) -> usize {
        match self {
            NliLabel::Supports => 0,
            NliLabel::Refutes => 1,
            NliLabel::Nei => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<NliLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NliLabel::Supports => "SUPPORTS",
            NliLabel::Refutes => "REFUTES",
            NliLabel::Nei => "NEI",
        }
    }

    /// Argmax over a probability triple. Ties resolve to the earliest label
    /// in `SUPPORTS < REFUTES < NEI` order.
    pub fn argmax(probs: &[f64; 3]) -> NliLabel {
        let mut best = 0;
        for i in 1..3 {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        NliLabel::ALL[best]
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label: {0:?}")]
pub struct UnknownLabel(pub String);

/// Case-insensitive label parsing; accepts the FEVER spelling
/// `NOT ENOUGH INFO` as well as `NEI`.
pub fn parse_label(s: &str) -> Result<NliLabel, UnknownLabel> {
    let norm = s.trim().to_ascii_uppercase();
    let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
    match norm.as_str() {
        "SUPPORTS" => Ok(NliLabel::Supports),
        "REFUTES" => Ok(NliLabel::Refutes),
        "NOT ENOUGH INFO" | "NEI" => Ok(NliLabel::Nei),
        _ => Err(UnknownLabel(s.to_string())),
    }
}

impl FromStr for NliLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("claim text is empty")]
pub struct EmptyClaim;

/// An input statement to be verified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl Claim {
    pub fn new(text: impl Into<String>) -> Result<Claim, EmptyClaim> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(EmptyClaim);
        }
        Ok(Claim { text, id: None })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Claim {
        self.id = Some(id.into());
        self
    }
}

/// Points at one sentence of one article in a corpus snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvidenceRef {
    pub article_title: String,
    pub sentence_index: usize,
}

impl EvidenceRef {
    pub fn new(article_title: impl Into<String>, sentence_index: usize) -> EvidenceRef {
        EvidenceRef {
            article_title: article_title.into(),
            sentence_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSentence {
    #[serde(rename = "ref")]
    pub evidence_ref: EvidenceRef,
    pub raw_text: String,
    pub cleaned_text: String,
}

impl EvidenceSentence {
    /// Builds the sentence, deriving `cleaned_text` from `raw_text`.
    pub fn new(evidence_ref: EvidenceRef, raw_text: impl Into<String>) -> EvidenceSentence {
        let raw_text = raw_text.into();
        let cleaned_text = crate::textproc::clean_hypothesis(&raw_text);
        EvidenceSentence {
            evidence_ref,
            raw_text,
            cleaned_text,
        }
    }
}

/// Class probabilities keyed by label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelProbs {
    #[serde(rename = "SUPPORTS")]
    pub supports: f64,
    #[serde(rename = "REFUTES")]
    pub refutes: f64,
    #[serde(rename = "NEI")]
    pub nei: f64,
}

impl LabelProbs {
    pub fn from_array(p: [f64; 3]) -> LabelProbs {
        LabelProbs {
            supports: p[0],
            refutes: p[1],
            nei: p[2],
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.supports, self.refutes, self.nei]
    }

    pub fn get(&self, label: NliLabel) -> f64 {
        self.to_array()[label.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePrediction {
    pub evidence: EvidenceSentence,
    pub probs: LabelProbs,
    pub label: NliLabel,
}

impl SentencePrediction {
    /// The label is always the tie-broken argmax of `probs`.
    pub fn new(evidence: EvidenceSentence, probs: [f64; 3]) -> SentencePrediction {
        SentencePrediction {
            evidence,
            label: NliLabel::argmax(&probs),
            probs: LabelProbs::from_array(probs),
        }
    }
}

/// Per-stage wall-clock durations of one `check`, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    #[serde(rename = "NER_model")]
    pub ner_model: f64,
    pub wiki_search: f64,
    pub wiki_texts: f64,
    pub embedding_claim: f64,
    pub embedding_hypothesis: f64,
    pub classification: f64,
    pub total_time: f64,
}

impl StageTimings {
    pub fn stage_max(&self) -> f64 {
        [
            self.ner_model,
            self.wiki_search,
            self.wiki_texts,
            self.embedding_claim,
            self.embedding_hypothesis,
            self.classification,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub claim: Claim,
    pub label: NliLabel,
    /// Sorted by descending evidence score.
    pub predictions: Vec<SentencePrediction>,
    pub candidates: Vec<String>,
    pub timings: StageTimings,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// A claim/hypothesis training example in SNLI style.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub claim_text: String,
    pub hypothesis_text: String,
    pub label: NliLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_ref: Option<EvidenceRef>,
}

impl LabeledPair {
    pub fn new(claim_text: impl Into<String>, hypothesis_text: impl Into<String>, label: NliLabel) -> LabeledPair {
        LabeledPair {
            claim_text: claim_text.into(),
            hypothesis_text: hypothesis_text.into(),
            label,
            evidence_ref: None,
        }
    }

    pub fn with_ref(mut self, evidence_ref: EvidenceRef) -> LabeledPair {
        self.evidence_ref = Some(evidence_ref);
        self
    }
}
