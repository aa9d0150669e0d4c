use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Deserializer, Serialize};

use super::EvalError;
use crate::types::{EvidenceRef, NliLabel};
use crate::wikiclient::canonical_title;

/// Predicted versus gold label and evidence for one claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(deserialize_with = "id_from_any")]
    pub claim_id: String,
    pub predicted_label: NliLabel,
    #[serde(default)]
    pub predicted_evidence: Vec<EvidenceRef>,
    pub gold_label: NliLabel,
    /// Alternative complete evidence sets; empty for NEI.
    #[serde(default)]
    pub gold_evidence_groups: Vec<Vec<EvidenceRef>>,
}

fn id_from_any<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    Ok(match serde_json::Value::deserialize(d)? {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    })
}

impl EvalRecord {
    fn top_k(&self, k: usize) -> HashSet<&EvidenceRef> {
        self.predicted_evidence.iter().take(k).collect()
    }

    fn gold_union(&self) -> HashSet<&EvidenceRef> {
        self.gold_evidence_groups.iter().flatten().collect()
    }

    fn evidence_counts(&self, k: usize) -> Result<(usize, usize, usize), EvalError> {
        if k == 0 {
            return Err(EvalError::ZeroK);
        }
        if self.gold_label == NliLabel::Nei {
            return Err(EvalError::NeiRecord(self.claim_id.clone()));
        }
        let predicted = self.top_k(k);
        let gold = self.gold_union();
        let tp = predicted.intersection(&gold).count();
        Ok((tp, predicted.len(), gold.len()))
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Share of the first `k` predicted references that belong to some gold group.
pub fn precision_at_k(record: &EvalRecord, k: usize) -> Result<f64, EvalError> {
    let (tp, predicted, _) = record.evidence_counts(k)?;
    Ok(ratio(tp, predicted))
}

/// Share of the gold references found among the first `k` predictions.
pub fn recall_at_k(record: &EvalRecord, k: usize) -> Result<f64, EvalError> {
    let (tp, _, gold) = record.evidence_counts(k)?;
    Ok(ratio(tp, gold))
}

/// Harmonic mean of [`precision_at_k`] and [`recall_at_k`]; zero when both are.
pub fn f1_at_k(record: &EvalRecord, k: usize) -> Result<f64, EvalError> {
    let p = precision_at_k(record, k)?;
    let r = recall_at_k(record, k)?;
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

/// Correct label and, unless the gold label is NEI, at least one gold
/// evidence group fully inside the first `k` predictions.
pub fn fever_correct(record: &EvalRecord, k: usize) -> bool {
    if record.predicted_label != record.gold_label {
        return false;
    }
    if record.gold_label == NliLabel::Nei {
        return true;
    }
    let predicted = record.top_k(k);
    record
        .gold_evidence_groups
        .iter()
        .any(|group| !group.is_empty() && group.iter().all(|r| predicted.contains(r)))
}

pub fn fever_score(records: &[EvalRecord], k: usize) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    let correct = records.iter().filter(|r| fever_correct(r, k)).count();
    Ok(ratio(correct, records.len()))
}

pub fn label_accuracy(records: &[EvalRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let correct = records.iter().filter(|r| r.predicted_label == r.gold_label).count();
    Ok(ratio(correct, records.len()))
}

/// Rows are gold labels, columns predicted labels, both in
/// SUPPORTS, REFUTES, NEI order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; 3]; 3]);

impl ConfusionMatrix {
    pub fn get(&self, gold: NliLabel, predicted: NliLabel) -> u64 {
        self.0[gold.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn row_total(&self, gold: NliLabel) -> u64 {
        self.0[gold.index()].iter().sum()
    }
}

pub fn confusion_matrix(records: &[EvalRecord]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for r in records {
        m.0[r.gold_label.index()][r.predicted_label.index()] += 1;
    }
    m
}

/// Gold articles against the ordered list a search returned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalCase {
    pub gold_articles: BTreeSet<String>,
    pub retrieved_articles: Vec<String>,
}

impl RetrievalCase {
    pub fn new<I, J, S, T>(gold: I, retrieved: J) -> RetrievalCase
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        RetrievalCase {
            gold_articles: gold.into_iter().map(Into::into).collect(),
            retrieved_articles: retrieved.into_iter().map(Into::into).collect(),
        }
    }
}

/// `|gold ∩ retrieved| / |gold|`, comparing canonical titles.
pub fn recall(case: &RetrievalCase) -> Result<f64, EvalError> {
    let gold: HashSet<String> = case.gold_articles.iter().map(|t| canonical_title(t)).collect();
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let retrieved: HashSet<String> = case.retrieved_articles.iter().map(|t| canonical_title(t)).collect();
    Ok(ratio(gold.intersection(&retrieved).count(), gold.len()))
}

/// Mean of per-case [`recall`].
pub fn average_recall(cases: &[RetrievalCase]) -> Result<f64, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut sum = 0.0;
    for case in cases {
        sum += recall(case)?;
    }
    Ok(sum / cases.len() as f64)
}
