//! Level-one query enhancement: find the named entities of a claim and turn
//! them into search queries.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::str::FromStr;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::types::Claim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityKind {
    Person,
    Org,
    Loc,
    Misc,
    Unknown,
}

impl FromStr for EntityKind {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "PERSON" | "PER" => EntityKind::Person,
            "ORG" => EntityKind::Org,
            "LOC" | "GPE" => EntityKind::Loc,
            "MISC" => EntityKind::Misc,
            "UNKNOWN" | "" => EntityKind::Unknown,
            other => return Err(QueryError::Protocol(format!("unknown entity kind {other:?}"))),
        })
    }
}

/// An entity mention; `char_span` is a half-open range of character (not
/// byte) offsets into the claim text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedEntity {
    pub text: String,
    pub char_span: (usize, usize),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<EntityKind>,
}

impl ExtractedEntity {
    /// Builds an entity from a character span, taking its text from `source`.
    pub fn from_span(source: &str, start: usize, end: usize, kind: Option<EntityKind>) -> Option<ExtractedEntity> {
        if start >= end {
            return None;
        }
        let text: String = source.chars().skip(start).take(end - start).collect();
        if text.chars().count() != end - start {
            return None;
        }
        Some(ExtractedEntity {
            text,
            char_span: (start, end),
            kind,
        })
    }

    fn len(&self) -> usize {
        self.char_span.1 - self.char_span.0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("entity extractor unavailable: {0}")]
    BackendUnavailable(String),
    #[error("entity extractor protocol error: {0}")]
    Protocol(String),
    #[error("per-query result limit must be at least 1")]
    ZeroLimit,
    #[error("unknown query strategy {0:?}")]
    UnknownStrategy(String),
    #[error("unknown ner backend {0:?} (expected `heuristic` or `external:<path>`)")]
    UnknownBackend(String),
}

/// A named-entity recognizer. Implementations must be callable from many
/// threads at once, serializing internally if needed.
pub trait EntityExtractor: Send + Sync {
    fn name(&self) -> &str;

    fn extract(&self, text: &str) -> Result<Vec<ExtractedEntity>, QueryError>;
}

/// Runs `extractor` on the claim and normalizes the result: spans sorted by
/// start, overlapping spans collapsed into the longer one.
pub fn extract_entities(claim: &Claim, extractor: &dyn EntityExtractor) -> Result<Vec<ExtractedEntity>, QueryError> {
    let raw = extractor.extract(&claim.text)?;
    Ok(normalize_entities(raw))
}

fn normalize_entities(mut entities: Vec<ExtractedEntity>) -> Vec<ExtractedEntity> {
    entities.sort_by_key(|e| (e.char_span.0, std::cmp::Reverse(e.char_span.1)));
    let mut out: Vec<ExtractedEntity> = Vec::with_capacity(entities.len());
    for e in entities {
        match out.last_mut() {
            Some(prev) if e.char_span.0 < prev.char_span.1 => {
                if e.len() > prev.len() {
                    *prev = e;
                }
            }
            _ => out.push(e),
        }
    }
    out
}

const INITIAL_STOPWORDS: &[&str] = &[
    "a", "an", "the", "there", "here", "this", "that", "these", "those", "it", "its", "he", "she", "they", "we", "i",
    "you", "his", "her", "their", "our", "my", "your", "in", "on", "at", "of", "for", "by", "with", "from", "to", "as",
    "and", "but", "or", "if", "when", "while", "after", "before", "during", "since", "some", "many", "most", "all",
    "no", "not", "one", "only", "what", "who", "which", "where", "how", "is", "was", "are", "were", "be", "every",
    "each", "both",
];

/// Lowercase words allowed inside a capitalized run ("Battle of Mogadishu").
const CONNECTORS: &[&str] = &["of", "the", "de", "da", "del", "der", "von", "van", "la", "le", "du"];

/// Model-free baseline recognizer: maximal runs of capitalized tokens, minus
/// a sentence-initial stopword, plus any double-quoted span.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicExtractor;

struct Token {
    core: String,
    start: usize,
    end: usize,
    sentence_initial: bool,
    /// Punctuation followed the word, so a run must not continue past it.
    breaks_after: bool,
}

fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut prev_ends_sentence = true;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let tok_start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let tok_end = i;
        let mut s = tok_start;
        while s < tok_end && !chars[s].is_alphanumeric() {
            s += 1;
        }
        let mut e = tok_end;
        while e > s && !chars[e - 1].is_alphanumeric() {
            e -= 1;
        }
        // possessive
        if e - s > 2 && chars[e - 1] == 's' && matches!(chars[e - 2], '\'' | '’') {
            e -= 2;
        }
        let trailing: String = chars[e..tok_end].iter().collect();
        let ends_sentence = trailing.contains(['.', '!', '?']);
        tokens.push(Token {
            core: chars[s..e].iter().collect(),
            start: s,
            end: e,
            sentence_initial: prev_ends_sentence,
            breaks_after: !trailing.is_empty(),
        });
        prev_ends_sentence = ends_sentence;
    }
    tokens
}

impl HeuristicExtractor {
    fn is_capitalized(tok: &Token) -> bool {
        let Some(first) = tok.core.chars().next() else {
            return false;
        };
        if !first.is_uppercase() || tok.core == "I" {
            return false;
        }
        !(tok.sentence_initial && INITIAL_STOPWORDS.contains(&tok.core.to_lowercase().as_str()))
    }

    fn capitalized_runs(text: &str) -> Vec<ExtractedEntity> {
        let tokens = tokenize(text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            if !Self::is_capitalized(&tokens[i]) {
                i += 1;
                continue;
            }
            let first = i;
            let mut last = i;
            let mut j = i;
            while !tokens[j].breaks_after && j + 1 < tokens.len() {
                let next = &tokens[j + 1];
                if Self::is_capitalized(next) {
                    j += 1;
                    last = j;
                } else if CONNECTORS.contains(&next.core.as_str()) && !next.breaks_after {
                    j += 1;
                } else {
                    break;
                }
            }
            if let Some(e) = ExtractedEntity::from_span(text, tokens[first].start, tokens[last].end, None) {
                out.push(e);
            }
            i = last + 1;
        }
        out
    }

    fn quoted_spans(text: &str) -> Vec<ExtractedEntity> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut open: Option<(usize, char)> = None;
        for (i, &c) in chars.iter().enumerate() {
            match (open, c) {
                (None, '"') => open = Some((i, '"')),
                (None, '“') => open = Some((i, '”')),
                (Some((start, close)), c) if c == close => {
                    let mut s = start + 1;
                    let mut e = i;
                    while s < e && chars[s].is_whitespace() {
                        s += 1;
                    }
                    while e > s && chars[e - 1].is_whitespace() {
                        e -= 1;
                    }
                    if let Some(ent) = ExtractedEntity::from_span(text, s, e, None) {
                        out.push(ent);
                    }
                    open = None;
                }
                _ => {}
            }
        }
        out
    }
}

impl EntityExtractor for HeuristicExtractor {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn extract(&self, text: &str) -> Result<Vec<ExtractedEntity>, QueryError> {
        let mut entities = Self::capitalized_runs(text);
        entities.extend(Self::quoted_spans(text));
        Ok(normalize_entities(entities))
    }
}

/// An out-of-process recognizer speaking a line protocol: one claim per
/// line on stdin, one line of tab-separated `start:end[:KIND]` character
/// spans on stdout (an empty line when nothing was found).
pub struct ExternalExtractor {
    name: String,
    io: Mutex<ExternalIo>,
}

struct ExternalIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalExtractor {
    pub fn spawn(program: impl AsRef<Path>) -> Result<ExternalExtractor, QueryError> {
        let program = program.as_ref();
        let mut child = Command::new(program)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| QueryError::BackendUnavailable(format!("{}: {e}", program.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalExtractor {
            name: format!("external:{}", program.display()),
            io: Mutex::new(ExternalIo { child, stdin, stdout }),
        })
    }
}

impl Drop for ExternalExtractor {
    fn drop(&mut self) {
        let io = self.io.get_mut();
        let _ = io.child.kill();
        let _ = io.child.wait();
    }
}

/// Parses one response line of the external protocol against `text`.
pub fn parse_span_line(text: &str, line: &str) -> Result<Vec<ExtractedEntity>, QueryError> {
    let n_chars = text.chars().count();
    let mut out = Vec::new();
    for field in line.trim_end_matches(['\r', '\n']).split('\t') {
        if field.trim().is_empty() {
            continue;
        }
        let mut parts = field.splitn(3, ':');
        let bad = || QueryError::Protocol(format!("malformed span {field:?}"));
        let start: usize = parts.next().and_then(|p| p.trim().parse().ok()).ok_or_else(bad)?;
        let end: usize = parts.next().and_then(|p| p.trim().parse().ok()).ok_or_else(bad)?;
        let kind = parts.next().map(EntityKind::from_str).transpose()?;
        if end > n_chars {
            return Err(QueryError::Protocol(format!(
                "span {start}:{end} exceeds claim length {n_chars}"
            )));
        }
        out.push(ExtractedEntity::from_span(text, start, end, kind).ok_or_else(bad)?);
    }
    Ok(out)
}

impl EntityExtractor for ExternalExtractor {
    fn name(&self) -> &str {
        &self.name
    }

    fn extract(&self, text: &str) -> Result<Vec<ExtractedEntity>, QueryError> {
        let mut io = self.io.lock();
        let request = text.replace(['\n', '\r'], " ");
        writeln!(io.stdin, "{request}")
            .and_then(|_| io.stdin.flush())
            .map_err(|e| QueryError::BackendUnavailable(e.to_string()))?;
        let mut line = String::new();
        let n = io
            .stdout
            .read_line(&mut line)
            .map_err(|e| QueryError::BackendUnavailable(e.to_string()))?;
        if n == 0 {
            return Err(QueryError::BackendUnavailable("extractor closed its output".into()));
        }
        parse_span_line(&request, &line)
    }
}

/// Value of the `ner.backend` configuration key.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NerBackend {
    #[default]
    Heuristic,
    External(PathBuf),
}

impl FromStr for NerBackend {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "heuristic" => Ok(NerBackend::Heuristic),
            other => match other.strip_prefix("external:") {
                Some(path) if !path.is_empty() => Ok(NerBackend::External(PathBuf::from(path))),
                _ => Err(QueryError::UnknownBackend(s.to_string())),
            },
        }
    }
}

impl TryFrom<String> for NerBackend {
    type Error = QueryError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<NerBackend> for String {
    fn from(b: NerBackend) -> String {
        b.to_string()
    }
}

impl fmt::Display for NerBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NerBackend::Heuristic => f.write_str("heuristic"),
            NerBackend::External(p) => write!(f, "external:{}", p.display()),
        }
    }
}

impl NerBackend {
    pub fn load(&self) -> Result<Box<dyn EntityExtractor>, QueryError> {
        Ok(match self {
            NerBackend::Heuristic => Box::new(HeuristicExtractor),
            NerBackend::External(path) => Box::new(ExternalExtractor::spawn(path)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStrategy {
    /// All entities in one query.
    Merged,
    /// One query per entity.
    #[default]
    Separate,
    /// The raw claim text as the only query.
    NoNer,
}

impl FromStr for QueryStrategy {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "merged" => Ok(QueryStrategy::Merged),
            "separate" => Ok(QueryStrategy::Separate),
            "no_ner" | "noner" => Ok(QueryStrategy::NoNer),
            _ => Err(QueryError::UnknownStrategy(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub queries: Vec<String>,
    pub per_query_limit: usize,
    pub strategy: QueryStrategy,
}

/// Turns a claim and its entities into search queries. Every strategy falls
/// back to the whole claim when there is nothing else to search for.
pub fn build_query_plan(
    claim: &Claim,
    entities: &[ExtractedEntity],
    strategy: QueryStrategy,
    n: usize,
) -> Result<QueryPlan, QueryError> {
    if n == 0 {
        return Err(QueryError::ZeroLimit);
    }
    let names: Vec<&str> = entities
        .iter()
        .map(|e| e.text.trim())
        .filter(|t| !t.is_empty())
        .collect();
    let fallback = || vec![claim.text.trim().to_string()];
    let queries = match strategy {
        QueryStrategy::NoNer => fallback(),
        QueryStrategy::Merged if names.is_empty() => fallback(),
        QueryStrategy::Merged => vec![names.join(" ")],
        QueryStrategy::Separate => {
            let mut seen = HashSet::new();
            let q: Vec<String> = names
                .into_iter()
                .filter(|t| seen.insert(t.to_lowercase()))
                .map(str::to_string)
                .collect();
            if q.is_empty() {
                fallback()
            } else {
                q
            }
        }
    };
    Ok(QueryPlan {
        queries,
        per_query_limit: n,
        strategy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entities(text: &str) -> Vec<String> {
        let claim = Claim::new(text).unwrap();
        extract_entities(&claim, &HeuristicExtractor)
            .unwrap()
            .into_iter()
            .map(|e| e.text)
            .collect()
    }

    #[test]
    fn heuristic_finds_multiword_entities() {
        assert_eq!(
            entities("Nikolaj Coster-Waldau worked with the Fox Broadcasting Company."),
            ["Nikolaj Coster-Waldau", "Fox Broadcasting Company"]
        );
    }

    #[test]
    fn heuristic_skips_initial_stopwords() {
        assert!(entities("there is water.").is_empty());
        assert_eq!(entities("A man sees Mogadishu."), ["Mogadishu"]);
        assert_eq!(entities("There is a capital called Mogadishu."), ["Mogadishu"]);
        assert_eq!(entities("Roman Atwood is a content creator."), ["Roman Atwood"]);
    }

    #[test]
    fn heuristic_connectors_punctuation_and_quotes() {
        assert_eq!(
            entities("He fought in the Battle of Mogadishu."),
            ["Battle of Mogadishu"]
        );
        assert_eq!(entities("She lives in Paris, France."), ["Paris", "France"]);
        assert_eq!(entities("Obama's dog lives in Washington."), ["Obama", "Washington"]);
        assert_eq!(entities("The film \"the last of us\" aired."), ["the last of us"]);
        // quoted span absorbs the capitalized run inside it
        assert_eq!(
            entities("It is called \"Blade Runner 2049\" today."),
            ["Blade Runner 2049"]
        );
    }

    #[test]
    fn spans_index_characters() {
        let claim = Claim::new("Zoë met Ångström.").unwrap();
        let ents = extract_entities(&claim, &HeuristicExtractor).unwrap();
        assert_eq!(ents[0].text, "Zoë");
        assert_eq!(ents[1].char_span, (8, 16));
        assert_eq!(ents[1].text, "Ångström");
    }

    #[test]
    fn normalization_merges_overlaps() {
        let text = "New York City Hall";
        let ents = vec![
            ExtractedEntity::from_span(text, 9, 18, None).unwrap(),
            ExtractedEntity::from_span(text, 0, 8, None).unwrap(),
            ExtractedEntity::from_span(text, 0, 13, None).unwrap(),
        ];
        let out = normalize_entities(ents);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text, "New York City");
    }

    fn ent(text: &str) -> ExtractedEntity {
        ExtractedEntity {
            text: text.to_string(),
            char_span: (0, text.chars().count()),
            kind: None,
        }
    }

    #[test]
    fn plan_strategies() {
        let claim = Claim::new("Nikolaj Coster-Waldau worked with the Fox Broadcasting Company.").unwrap();
        let ents = [ent("Nikolaj Coster-Waldau"), ent("Fox Broadcasting Company")];
        let merged = build_query_plan(&claim, &ents, QueryStrategy::Merged, 10).unwrap();
        assert_eq!(merged.queries, ["Nikolaj Coster-Waldau Fox Broadcasting Company"]);
        let sep = build_query_plan(&claim, &ents, QueryStrategy::Separate, 3).unwrap();
        assert_eq!(sep.queries, ["Nikolaj Coster-Waldau", "Fox Broadcasting Company"]);
        assert_eq!(sep.per_query_limit, 3);
        let raw = build_query_plan(&claim, &ents, QueryStrategy::NoNer, 3).unwrap();
        assert_eq!(raw.queries, [claim.text.clone()]);
    }

    #[test]
    fn plan_fallbacks_and_errors() {
        let claim = Claim::new("there is water.").unwrap();
        let plan = build_query_plan(&claim, &[], QueryStrategy::Separate, 5).unwrap();
        assert_eq!(plan.queries, ["there is water."]);
        let plan = build_query_plan(&claim, &[], QueryStrategy::Merged, 5).unwrap();
        assert_eq!(plan.queries, ["there is water."]);
        assert!(matches!(
            build_query_plan(&claim, &[], QueryStrategy::Separate, 0),
            Err(QueryError::ZeroLimit)
        ));
    }

    #[test]
    fn separate_dedups_case_insensitively() {
        let claim = Claim::new("x").unwrap();
        let plan = build_query_plan(
            &claim,
            &[ent("Paris"), ent("PARIS"), ent("Rome")],
            QueryStrategy::Separate,
            2,
        )
        .unwrap();
        assert_eq!(plan.queries, ["Paris", "Rome"]);
    }

    #[test]
    fn parses_config_values() {
        assert_eq!("heuristic".parse::<NerBackend>().unwrap(), NerBackend::Heuristic);
        assert_eq!(
            "external:/opt/ner".parse::<NerBackend>().unwrap(),
            NerBackend::External("/opt/ner".into())
        );
        assert!("spacy".parse::<NerBackend>().is_err());
        assert_eq!("no-ner".parse::<QueryStrategy>().unwrap(), QueryStrategy::NoNer);
        assert_eq!("Separate".parse::<QueryStrategy>().unwrap(), QueryStrategy::Separate);
    }

    #[test]
    fn span_line_protocol() {
        let text = "Nikolaj Coster-Waldau worked with Fox.";
        let ents = parse_span_line(text, "0:21:PERSON\t34:37:ORG\n").unwrap();
        assert_eq!(ents[0].text, "Nikolaj Coster-Waldau");
        assert_eq!(ents[0].kind, Some(EntityKind::Person));
        assert_eq!(ents[1].text, "Fox");
        assert!(parse_span_line(text, "\n").unwrap().is_empty());
        assert!(parse_span_line(text, "0:99").is_err());
        assert!(parse_span_line(text, "zero:1").is_err());
    }

    #[test]
    fn missing_external_backend_is_unavailable() {
        let err = NerBackend::External("/nonexistent/ner-binary".into())
            .load()
            .err()
            .unwrap();
        assert!(matches!(err, QueryError::BackendUnavailable(_)));
    }

    proptest! {
        #[test]
        fn plans_are_never_empty(text in "[A-Za-z ,.\"]{1,60}", n in 1usize..10) {
            prop_assume!(!text.trim().is_empty());
            let claim = Claim::new(text.clone()).unwrap();
            let ents = extract_entities(&claim, &HeuristicExtractor).unwrap();
            for w in ents.windows(2) {
                prop_assert!(w[0].char_span.1 <= w[1].char_span.0);
            }
            for e in &ents {
                let sub: String = text.chars().skip(e.char_span.0).take(e.char_span.1 - e.char_span.0).collect();
                prop_assert_eq!(&sub, &e.text);
            }
            for strategy in [QueryStrategy::Merged, QueryStrategy::Separate, QueryStrategy::NoNer] {
                let plan = build_query_plan(&claim, &ents, strategy, n).unwrap();
                prop_assert!(!plan.queries.is_empty());
                prop_assert!(plan.queries.iter().all(|q| !q.is_empty()));
                if strategy == QueryStrategy::Separate && !ents.is_empty() {
                    prop_assert!(plan.queries.len() <= ents.len());
                }
                prop_assert_eq!(build_query_plan(&claim, &ents, strategy, n).unwrap(), plan);
            }
        }
    }
}
