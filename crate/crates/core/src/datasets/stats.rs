use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::types::{LabeledPair, NliLabel};

/// Whitespace-token length counts of hypotheses, per label or pooled
/// (`label == None`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LengthHistogram {
    pub counts: BTreeMap<Option<NliLabel>, BTreeMap<usize, usize>>,
}

impl LengthHistogram {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, label: Option<NliLabel>, length: usize) -> usize {
        self.counts
            .get(&label)
            .and_then(|h| h.get(&length))
            .copied()
            .unwrap_or(0)
    }

    pub fn mean(&self, label: Option<NliLabel>) -> Option<f64> {
        let h = self.counts.get(&label)?;
        let n: usize = h.values().sum();
        let total: usize = h.iter().map(|(len, c)| len * c).sum();
        (n > 0).then(|| total as f64 / n as f64)
    }
}

/// Tab-separated `label length count` rows.
impl fmt::Display for LengthHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "label\tlength\tcount")?;
        for (label, h) in &self.counts {
            let name = label.map_or("ALL", |l| l.as_str());
            for (len, c) in h {
                writeln!(f, "{name}\t{len}\t{c}")?;
            }
        }
        Ok(())
    }
}

pub fn hypothesis_length_histogram(pairs: &[LabeledPair], by_label: bool) -> LengthHistogram {
    let mut hist = LengthHistogram::default();
    for p in pairs {
        let key = by_label.then_some(p.label);
        let len = p.hypothesis_text.split_whitespace().count();
        *hist.counts.entry(key).or_default().entry(len).or_default() += 1;
    }
    hist
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HypothesisCount {
    pub hypothesis: String,
    /// SUPPORTS, REFUTES, NEI.
    pub counts: [usize; 3],
}

impl HypothesisCount {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// The `k` most frequent hypotheses, most frequent first, ties in
/// lexicographic order.
pub fn top_frequent_hypotheses(pairs: &[LabeledPair], k: usize) -> Vec<HypothesisCount> {
    let mut by_text: HashMap<&str, [usize; 3]> = HashMap::new();
    for p in pairs {
        by_text.entry(&p.hypothesis_text).or_default()[p.label.index()] += 1;
    }
    let mut rows: Vec<HypothesisCount> = by_text
        .into_iter()
        .map(|(h, counts)| HypothesisCount {
            hypothesis: h.to_string(),
            counts,
        })
        .collect();
    rows.sort_by(|a, b| b.total().cmp(&a.total()).then_with(|| a.hypothesis.cmp(&b.hypothesis)));
    rows.truncate(k);
    rows
}

/// Mean hypothesis length in characters; `None` for no pairs.
pub fn mean_hypothesis_chars(pairs: &[LabeledPair]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let total: usize = pairs.iter().map(|p| p.hypothesis_text.chars().count()).sum();
    Some(total as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_histogram() {
        let h = hypothesis_length_histogram(&[LabeledPair::new("a", "x y", NliLabel::Supports)], true);
        assert_eq!(h.count(Some(NliLabel::Supports), 2), 1);
        assert_eq!(h.count(None, 2), 0);
        assert!(hypothesis_length_histogram(&[], true).is_empty());
        assert_eq!(h.to_string(), "label\tlength\tcount\nSUPPORTS\t2\t1\n");
    }

    #[test]
    fn entailment_hypotheses_shorter_in_snli_style_fixture() {
        let mut pairs = Vec::new();
        for i in 0..30 {
            pairs.push(LabeledPair::new(format!("p{i}"), "A man sleeps.", NliLabel::Supports));
            pairs.push(LabeledPair::new(
                format!("p{i}"),
                "A man is sleeping on a red couch at noon.",
                NliLabel::Refutes,
            ));
            pairs.push(LabeledPair::new(
                format!("p{i}"),
                "A tall man is sleeping after a long day.",
                NliLabel::Nei,
            ));
        }
        let h = hypothesis_length_histogram(&pairs, true);
        let m = |l| h.mean(Some(l)).unwrap();
        assert!(m(NliLabel::Supports) < m(NliLabel::Refutes));
        assert!(m(NliLabel::Supports) < m(NliLabel::Nei));
        let pooled = hypothesis_length_histogram(&pairs, false);
        assert_eq!(pooled.counts.len(), 1);
    }

    #[test]
    fn frequent_hypotheses() {
        let mut pairs: Vec<_> = (0..5)
            .map(|i| LabeledPair::new(format!("c{i}"), "He is sleeping", NliLabel::Refutes))
            .collect();
        pairs.push(LabeledPair::new("c", "b", NliLabel::Supports));
        pairs.push(LabeledPair::new("c", "a", NliLabel::Nei));
        let top = top_frequent_hypotheses(&pairs, 15);
        assert_eq!(top.len(), 3);
        assert_eq!(top[0].hypothesis, "He is sleeping");
        assert_eq!(top[0].counts, [0, 5, 0]);
        assert_eq!(top[1].hypothesis, "a");
        assert_eq!(top_frequent_hypotheses(&pairs, 1).len(), 1);
        assert!(top_frequent_hypotheses(&[], 15).is_empty());
    }

    #[test]
    fn mean_chars() {
        let pairs = [
            LabeledPair::new("c", "abcd", NliLabel::Nei),
            LabeledPair::new("c", "ab", NliLabel::Nei),
        ];
        assert_eq!(mean_hypothesis_chars(&pairs), Some(3.0));
        assert_eq!(mean_hypothesis_chars(&[]), None);
    }
}
