//! FEVER ingestion, NLI pair construction, the training-set filter and
//! corpus statistics.

mod fever;
mod filter;
mod pairs;
mod stats;

use std::io::{self, BufRead, Write};
use std::path::Path;

pub use fever::{load_fever, parse_fever_line, FeverRawRecord, LineError, WikiDumpIndex};
pub use filter::{
    balance_hypotheses, balance_hypotheses_with, dedup_exact, filter_pipeline, filter_pipeline_with, undersample_nei,
    BalanceOptions, FilterReport, DEFAULT_MIN_GROUP,
};
pub use pairs::{build_nei_test, build_pair_dataset, sample_nei_train, PairBuild};
pub use stats::{
    hypothesis_length_histogram, mean_hypothesis_chars, top_frequent_hypotheses, HypothesisCount, LengthHistogram,
};

use crate::types::{parse_label, LabeledPair};

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Writes `claim TAB hypothesis TAB label` rows. Tabs and newlines inside
/// fields become spaces.
pub fn write_pairs_tsv<W: Write>(mut w: W, pairs: &[LabeledPair]) -> io::Result<()> {
    for p in pairs {
        writeln!(
            w,
            "{}\t{}\t{}",
            tsv_field(&p.claim_text),
            tsv_field(&p.hypothesis_text),
            p.label
        )?;
    }
    w.flush()
}

/// Reads the pair TSV format; malformed rows are reported and skipped.
pub fn read_pairs_tsv<R: BufRead>(r: R) -> io::Result<(Vec<LabeledPair>, Vec<LineError>)> {
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed = match fields.as_slice() {
            [c, h, l] => parse_label(l)
                .map(|l| LabeledPair::new(*c, *h, l))
                .map_err(|e| e.to_string()),
            _ => Err(format!("expected 3 tab-separated fields, found {}", fields.len())),
        };
        match parsed {
            Ok(p) => pairs.push(p),
            Err(message) => errors.push(LineError { line: i + 1, message }),
        }
    }
    Ok((pairs, errors))
}

pub fn load_pairs_tsv(path: impl AsRef<Path>) -> io::Result<(Vec<LabeledPair>, Vec<LineError>)> {
    read_pairs_tsv(io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_pairs_tsv(path: impl AsRef<Path>, pairs: &[LabeledPair]) -> io::Result<()> {
    write_pairs_tsv(io::BufWriter::new(std::fs::File::create(path)?), pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::NliLabel;
    use proptest::prelude::*;

    #[test]
    fn tsv_roundtrip_and_errors() {
        let pairs = vec![
            LabeledPair::new(
                "Roman Atwood is a content creator.",
                "He is a content creator .",
                NliLabel::Supports,
            ),
            LabeledPair::new("c", "with\ttab", NliLabel::Nei),
        ];
        let mut buf = Vec::new();
        write_pairs_tsv(&mut buf, &pairs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("c\twith tab\tNEI"));
        let (back, errs) = read_pairs_tsv(text.as_bytes()).unwrap();
        assert!(errs.is_empty());
        assert_eq!(back[0], pairs[0]);

        let (ok, errs) = read_pairs_tsv("a\tb\tMAYBE\nonly one\na\tb\trefutes\n".as_bytes()).unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(errs.iter().map(|e| e.line).collect::<Vec<_>>(), [1, 2]);
    }

    proptest! {
        #[test]
        fn tsv_roundtrip(rows in proptest::collection::vec(("[a-zA-Z .,]{1,20}", "[a-zA-Z .,]{1,20}", 0..3usize), 0..20)) {
            let pairs: Vec<_> = rows.iter().map(|(c, h, l)| LabeledPair::new(c.as_str(), h.as_str(), NliLabel::ALL[*l])).collect();
            let mut buf = Vec::new();
            write_pairs_tsv(&mut buf, &pairs).unwrap();
            let (back, errs) = read_pairs_tsv(buf.as_slice()).unwrap();
            prop_assert!(errs.is_empty());
            prop_assert_eq!(back, pairs);
        }
    }
}
