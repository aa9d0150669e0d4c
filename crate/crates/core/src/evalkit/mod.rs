//! Evaluation: retrieval recall, FEVER-style scoring, evidence precision /
//! recall / F1 at k, confusion matrices, evidence ranking, verdict
//! aggregation and per-stage latency profiling.

mod metrics;
mod profile;
mod report;

pub use metrics::{
    average_recall, confusion_matrix, f1_at_k, fever_correct, fever_score, label_accuracy, precision_at_k, recall,
    recall_at_k, ConfusionMatrix, EvalRecord, RetrievalCase,
};
pub use profile::{LatencyReport, Profiler, Stage, StageSummary, UnknownStage};
pub use report::{evaluate, read_eval_records, EvalReport, RecordOutcome};

use crate::types::{NliLabel, SentencePrediction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("retrieval case has no gold articles")]
    EmptyGold,
    #[error("no records to evaluate")]
    EmptyInput,
    #[error("evidence metrics are undefined for NEI records (claim {0})")]
    NeiRecord(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
}

/// Margin of the strongest non-NEI class over NEI.
pub fn evidence_score(p: &SentencePrediction) -> f64 {
    p.probs.supports.max(p.probs.refutes) - p.probs.nei
}

/// Orders predictions by descending [`evidence_score`], breaking ties by
/// article title and sentence index.
pub fn rank_evidence(mut predictions: Vec<SentencePrediction>) -> Vec<SentencePrediction> {
    predictions.sort_by(|a, b| {
        evidence_score(b)
            .total_cmp(&evidence_score(a))
            .then_with(|| a.evidence.evidence_ref.cmp(&b.evidence.evidence_ref))
    });
    predictions
}

pub const DEFAULT_TAU: f64 = 0.5;

/// Claim-level label from sentence-level predictions: NEI unless the best
/// SUPPORTS or REFUTES probability reaches `tau`; SUPPORTS wins ties.
pub fn aggregate_verdict(predictions: &[SentencePrediction], tau: f64) -> Result<NliLabel, EvalError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(EvalError::InvalidThreshold(tau));
    }
    if predictions.is_empty() {
        return Ok(NliLabel::Nei);
    }
    let s = predictions
        .iter()
        .map(|p| p.probs.supports)
        .fold(f64::NEG_INFINITY, f64::max);
    let r = predictions
        .iter()
        .map(|p| p.probs.refutes)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(if s.max(r) < tau {
        NliLabel::Nei
    } else if s >= r {
        NliLabel::Supports
    } else {
        NliLabel::Refutes
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{EvidenceRef, EvidenceSentence};

    fn pred(title: &str, idx: usize, probs: [f64; 3]) -> SentencePrediction {
        SentencePrediction::new(EvidenceSentence::new(EvidenceRef::new(title, idx), "s"), probs)
    }

    #[test]
    fn ranks_by_margin() {
        let ranked = rank_evidence(vec![pred("B", 0, [0.4, 0.3, 0.3]), pred("A", 0, [0.8, 0.1, 0.1])]);
        assert_eq!(ranked[0].evidence.evidence_ref.article_title, "A");
        assert!((evidence_score(&ranked[0]) - 0.7).abs() < 1e-12);
        assert!((evidence_score(&ranked[1]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn equal_scores_fall_back_to_reference_order() {
        let nei = [0.0, 0.0, 1.0];
        let ranked = rank_evidence(vec![pred("B", 0, nei), pred("A", 2, nei), pred("A", 1, nei)]);
        let keys: Vec<_> = ranked
            .iter()
            .map(|p| {
                (
                    p.evidence.evidence_ref.article_title.as_str(),
                    p.evidence.evidence_ref.sentence_index,
                )
            })
            .collect();
        assert_eq!(keys, [("A", 1), ("A", 2), ("B", 0)]);
        assert!(rank_evidence(vec![]).is_empty());
    }

    #[test]
    fn aggregation_rule() {
        assert_eq!(aggregate_verdict(&[], 0.5), Ok(NliLabel::Nei));
        assert_eq!(
            aggregate_verdict(&[pred("A", 0, [0.9, 0.05, 0.05])], 0.5),
            Ok(NliLabel::Supports)
        );
        let weak = [pred("A", 0, [0.4, 0.1, 0.5]), pred("A", 1, [0.2, 0.3, 0.5])];
        assert_eq!(aggregate_verdict(&weak, 0.5), Ok(NliLabel::Nei));
        let split = [pred("A", 0, [0.6, 0.1, 0.3]), pred("A", 1, [0.1, 0.7, 0.2])];
        assert_eq!(aggregate_verdict(&split, 0.5), Ok(NliLabel::Refutes));
        let tie = [pred("A", 0, [0.6, 0.1, 0.3]), pred("A", 1, [0.1, 0.6, 0.3])];
        assert_eq!(aggregate_verdict(&tie, 0.5), Ok(NliLabel::Supports));
        assert_eq!(aggregate_verdict(&[], 1.0), Err(EvalError::InvalidThreshold(1.0)));
    }
}
