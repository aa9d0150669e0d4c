use std::io::{self, BufRead};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{confusion_matrix, f1_at_k, fever_correct, fever_score, label_accuracy};
use super::{ConfusionMatrix, EvalError, EvalRecord};
use crate::types::NliLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fever_score: f64,
    pub accuracy: f64,
    /// Mean evidence F1@k over records whose gold label is not NEI.
    #[serde(rename = "evidence_f1@k")]
    pub evidence_f1_at_k: f64,
    pub k: usize,
    pub confusion_matrix: ConfusionMatrix,
    pub n_records: usize,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub outcomes: Vec<RecordOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub claim_id: String,
    pub gold_label: NliLabel,
    pub predicted_label: NliLabel,
    pub label_correct: bool,
    pub fever_correct: bool,
    pub evidence_f1: Option<f64>,
}

impl EvalReport {
    /// Per-record outcomes as TSV with a header row.
    pub fn outcomes_tsv(&self) -> String {
        let mut out =
            String::from("claim_id\tgold_label\tpredicted_label\tlabel_correct\tfever_correct\tevidence_f1\n");
        for o in &self.outcomes {
            let f1 = o.evidence_f1.map_or_else(|| "-".to_string(), |f| format!("{f:.6}"));
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                o.claim_id, o.gold_label, o.predicted_label, o.label_correct as u8, o.fever_correct as u8, f1
            ));
        }
        out
    }
}

/// Computes every metric over `records`, with evidence cut off at `k`.
pub fn evaluate(records: &[EvalRecord], k: usize) -> Result<EvalReport, EvalError> {
    let fever = fever_score(records, k)?;
    let accuracy = label_accuracy(records)?;
    let mut warnings = Vec::new();
    let mut outcomes = Vec::with_capacity(records.len());
    let mut f1_sum = 0.0;
    let mut f1_n = 0usize;
    for r in records {
        let is_nei = r.gold_label == NliLabel::Nei;
        if is_nei != r.gold_evidence_groups.is_empty() {
            warnings.push(format!(
                "claim {}: gold label {} with {} evidence groups",
                r.claim_id,
                r.gold_label,
                r.gold_evidence_groups.len()
            ));
        }
        let f1 = if is_nei { None } else { Some(f1_at_k(r, k)?) };
        if let Some(f) = f1 {
            f1_sum += f;
            f1_n += 1;
        }
        outcomes.push(RecordOutcome {
            claim_id: r.claim_id.clone(),
            gold_label: r.gold_label,
            predicted_label: r.predicted_label,
            label_correct: r.gold_label == r.predicted_label,
            fever_correct: fever_correct(r, k),
            evidence_f1: f1,
        });
    }
    Ok(EvalReport {
        fever_score: fever,
        accuracy,
        evidence_f1_at_k: if f1_n == 0 { 0.0 } else { f1_sum / f1_n as f64 },
        k,
        confusion_matrix: confusion_matrix(records),
        n_records: records.len(),
        warnings,
        outcomes,
    })
}

/// Reads JSON-lines eval records. Malformed lines are skipped and reported
/// with their line number.
pub fn read_eval_records(path: impl AsRef<Path>) -> io::Result<(Vec<EvalRecord>, Vec<String>)> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => records.push(r),
            Err(e) => errors.push(format!("line {}: {e}", i + 1)),
        }
    }
    Ok((records, errors))
}
