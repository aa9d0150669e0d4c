use std::collections::BTreeMap;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::textproc::segment_sentences;
use crate::types::{parse_label, EvidenceRef, NliLabel};
use crate::wikiclient::canonical_title;

/// One claim of the official FEVER JSONL files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeverRawRecord {
    pub id: u64,
    pub claim: String,
    pub label: NliLabel,
    /// Alternative evidence sets; empty exactly when the label is NEI.
    pub evidence_groups: Vec<Vec<EvidenceRef>>,
}

/// A malformed input line, 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parses one line of the FEVER schema:
/// `{"id", "claim", "label", "evidence": [[[ann_id, ev_id, title, line], ...], ...]}`.
/// NEI evidence carries null titles and is mapped to no groups.
pub fn parse_fever_line(line: &str) -> Result<FeverRawRecord, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let id = v["id"].as_u64().ok_or("missing integer id")?;
    let claim = v["claim"].as_str().ok_or("missing claim")?.to_string();
    let label = parse_label(v["label"].as_str().ok_or("missing label")?).map_err(|e| e.to_string())?;
    let mut evidence_groups = Vec::new();
    if label != NliLabel::Nei {
        let groups = v["evidence"].as_array().ok_or("missing evidence")?;
        for group in groups {
            let mut refs = Vec::new();
            for item in group.as_array().ok_or("evidence group is not an array")? {
                let title = item[2].as_str().ok_or("evidence title missing")?;
                let idx = item[3].as_u64().ok_or("evidence line missing")?;
                refs.push(EvidenceRef::new(title, idx as usize));
            }
            if !refs.is_empty() {
                evidence_groups.push(refs);
            }
        }
        if evidence_groups.is_empty() {
            return Err(format!("{label} record without evidence"));
        }
    }
    Ok(FeverRawRecord {
        id,
        claim,
        label,
        evidence_groups,
    })
}

/// Reads a FEVER JSONL file. Blank lines are skipped; malformed lines are
/// reported and skipped.
pub fn load_fever(path: impl AsRef<Path>) -> io::Result<(Vec<FeverRawRecord>, Vec<LineError>)> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_fever_line(&line) {
            Ok(r) => records.push(r),
            Err(message) => errors.push(LineError { line: i + 1, message }),
        }
    }
    Ok((records, errors))
}

/// Article sentences of the FEVER wiki-pages dump, keyed by canonical title.
///
/// Sentences keep their raw dump form (`sentence TAB link TAB link ...`);
/// indices with no sentence hold an empty string.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WikiDumpIndex {
    articles: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct DumpLine {
    id: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    lines: String,
}

/// Splits the dump's `lines` field (`idx TAB sentence [TAB links]` rows).
fn parse_dump_lines(lines: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for row in lines.split('\n') {
        let Some((idx, rest)) = row.split_once('\t') else {
            continue;
        };
        let Ok(idx) = idx.trim().parse::<usize>() else { continue };
        if out.len() <= idx {
            out.resize(idx + 1, String::new());
        }
        out[idx] = rest.to_string();
    }
    out
}

impl WikiDumpIndex {
    pub fn new() -> WikiDumpIndex {
        WikiDumpIndex::default()
    }

    pub fn insert(&mut self, title: &str, sentences: Vec<String>) {
        self.articles.insert(canonical_title(title), sentences);
    }

    /// Loads every `*.jsonl` file in `path` (sorted by name), or `path`
    /// itself when it is a file.
    pub fn load(path: impl AsRef<Path>) -> io::Result<(WikiDumpIndex, Vec<String>)> {
        let path = path.as_ref();
        let files: Vec<PathBuf> = if path.is_dir() {
            let mut f: Vec<PathBuf> = std::fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            f.sort();
            f
        } else {
            vec![path.to_path_buf()]
        };
        let mut index = WikiDumpIndex::new();
        let mut errors = Vec::new();
        for file in files {
            let reader = io::BufReader::new(std::fs::File::open(&file)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<DumpLine>(&line) {
                    Ok(d) if d.id.is_empty() => {}
                    Ok(d) => {
                        let sentences = if d.lines.trim().is_empty() {
                            segment_sentences(&d.text)
                        } else {
                            parse_dump_lines(&d.lines)
                        };
                        index.insert(&d.id, sentences);
                    }
                    Err(e) => errors.push(format!("{}:{}: {e}", file.display(), i + 1)),
                }
            }
        }
        Ok((index, errors))
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn article(&self, title: &str) -> Option<&[String]> {
        self.articles.get(&canonical_title(title)).map(Vec::as_slice)
    }

    /// Raw sentence for a reference; `None` when the article or index is
    /// missing or the sentence is empty.
    pub fn sentence(&self, r: &EvidenceRef) -> Option<&str> {
        self.article(&r.article_title)?
            .get(r.sentence_index)
            .map(String::as_str)
            .filter(|s| !s.trim().is_empty())
    }

    /// Titles in sorted order.
    pub fn titles(&self) -> impl Iterator<Item = &str> {
        self.articles.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_supported_claim() {
        let line = r#"{"id": 7, "verifiable": "VERIFIABLE", "label": "SUPPORTS", "claim": "Mogadishu is a city.", "evidence": [[[1, 2, "Mogadishu", 0]], [[3, 4, "Mogadishu", 1], [3, 5, "Somalia", 2]]]}"#;
        let r = parse_fever_line(line).unwrap();
        assert_eq!(r.id, 7);
        assert_eq!(r.label, NliLabel::Supports);
        assert_eq!(
            r.evidence_groups,
            vec![
                vec![EvidenceRef::new("Mogadishu", 0)],
                vec![EvidenceRef::new("Mogadishu", 1), EvidenceRef::new("Somalia", 2)]
            ]
        );
    }

    #[test]
    fn nei_has_no_groups() {
        let line = r#"{"id": 1, "label": "NOT ENOUGH INFO", "claim": "x", "evidence": [[[5, null, null, null]]]}"#;
        let r = parse_fever_line(line).unwrap();
        assert_eq!(r.label, NliLabel::Nei);
        assert!(r.evidence_groups.is_empty());
    }

    #[test]
    fn reports_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        std::fs::write(
            &path,
            "{\"id\": 1, \"label\": \"REFUTES\", \"claim\": \"a\", \"evidence\": [[[0, 0, \"A\", 3]]]}\nnot json\n\n{\"id\": 2, \"label\": \"SUPPORTS\", \"claim\": \"b\", \"evidence\": [[[0, 0, null, null]]]}\n",
        )
        .unwrap();
        let (recs, errs) = load_fever(&path).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(errs.iter().map(|e| e.line).collect::<Vec<_>>(), [2, 4]);

        std::fs::write(&path, "").unwrap();
        assert_eq!(load_fever(&path).unwrap().0, vec![]);
    }

    #[test]
    fn loads_dump_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("wiki-001.jsonl"),
            concat!(
                r#"{"id": "", "text": "", "lines": ""}"#,
                "\n",
                r#"{"id": "Roman_Atwood", "text": "t", "lines": "0\tRoman Bernard Atwood is an American YouTube personality .\tYouTube\n1\t\n2\tHe is a prankster ."}"#,
                "\n"
            ),
        )
        .unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let (idx, errs) = WikiDumpIndex::load(dir.path()).unwrap();
        assert!(errs.is_empty());
        assert_eq!(idx.len(), 1);
        let r0 = EvidenceRef::new("Roman_Atwood", 0);
        assert_eq!(
            idx.sentence(&r0),
            Some("Roman Bernard Atwood is an American YouTube personality .\tYouTube")
        );
        assert_eq!(idx.sentence(&EvidenceRef::new("Roman Atwood", 1)), None);
        assert_eq!(
            idx.sentence(&EvidenceRef::new("Roman Atwood", 2)),
            Some("He is a prankster .")
        );
        assert_eq!(idx.sentence(&EvidenceRef::new("Roman Atwood", 9)), None);
    }
}
