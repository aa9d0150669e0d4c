use std::collections::HashSet;
use std::io;
use std::path::Path;

use super::collapse_whitespace;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

/// Lower-cased abbreviations (with their trailing period) that never end a
/// sentence.
#[derive(Debug, Clone)]
pub struct Abbreviations {
    entries: HashSet<String>,
}

impl Abbreviations {
    /// Parses one abbreviation per line; blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Abbreviations {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let l = l.to_lowercase();
                if l.ends_with('.') {
                    l
                } else {
                    format!("{l}.")
                }
            })
            .collect();
        Abbreviations { entries }
    }

    pub fn from_file(path: impl AsRef<Path>) -> io::Result<Abbreviations> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for Abbreviations {
    fn default() -> Self {
        Self::parse(DEFAULT_ABBREVIATIONS)
    }
}

/// Rule-based splitter: a sentence ends at `.`, `!` or `?` (plus any closing
/// quotes or brackets) when followed by whitespace and an uppercase letter,
/// digit, quote or opening bracket. Paragraph breaks always end a sentence.
#[derive(Debug, Clone, Default)]
pub struct SentenceSegmenter {
    abbreviations: Abbreviations,
}

impl SentenceSegmenter {
    pub fn new(abbreviations: Abbreviations) -> SentenceSegmenter {
        SentenceSegmenter { abbreviations }
    }

    pub fn segment(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for paragraph in split_paragraphs(text) {
            self.segment_paragraph(&paragraph, &mut out);
        }
        out
    }

    fn segment_paragraph(&self, para: &str, out: &mut Vec<String>) {
        let chars: Vec<(usize, char)> = para.char_indices().collect();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let c = chars[i].1;
            if !matches!(c, '.' | '!' | '?') {
                i += 1;
                continue;
            }
            let mut end = i + 1;
            while end < chars.len() && is_closing(chars[end].1) {
                end += 1;
            }
            if end >= chars.len() || !chars[end].1.is_whitespace() {
                i = end.max(i + 1);
                continue;
            }
            let mut next = end;
            while next < chars.len() && chars[next].1.is_whitespace() {
                next += 1;
            }
            if next >= chars.len() {
                break;
            }
            let opener = chars[next].1;
            let opens_sentence = opener.is_uppercase()
                || opener.is_ascii_digit()
                || matches!(opener, '"' | '\'' | '“' | '‘' | '(' | '[');
            if opens_sentence && !(c == '.' && self.is_abbreviation(para, &chars, start, i)) {
                let byte_end = chars.get(end).map_or(para.len(), |&(b, _)| b);
                push_sentence(&para[chars[start].0..byte_end], out);
                start = next;
            }
            i = next;
        }
        if start < chars.len() {
            push_sentence(&para[chars[start].0..], out);
        }
    }

    /// Whether the word ending with the period at `dot` is an abbreviation
    /// or an initial.
    fn is_abbreviation(&self, para: &str, chars: &[(usize, char)], start: usize, dot: usize) -> bool {
        let mut w = dot;
        while w > start && !chars[w - 1].1.is_whitespace() {
            w -= 1;
        }
        let word = &para[chars[w].0..chars[dot].0 + 1];
        let word = word.trim_start_matches(|ch: char| matches!(ch, '(' | '[' | '"' | '\'' | '“' | '‘'));
        if self.abbreviations.contains(word) {
            return true;
        }
        // Initials and dotted acronyms: "J.", "D.C.", "U.S.A."
        let body = &word[..word.len() - 1];
        !body.is_empty()
            && body
                .split('.')
                .all(|part| part.chars().count() == 1 && part.chars().all(char::is_alphabetic))
    }
}

/// Splits `text` into sentences using the bundled abbreviation list.
pub fn segment_sentences(text: &str) -> Vec<String> {
    thread_local! {
        static SEGMENTER: SentenceSegmenter = SentenceSegmenter::default();
    }
    SEGMENTER.with(|s| s.segment(text))
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | ')' | ']' | '.' | '!' | '?')
}

fn push_sentence(s: &str, out: &mut Vec<String>) {
    let s = collapse_whitespace(s);
    if !s.is_empty() {
        out.push(s);
    }
}

fn split_paragraphs(text: &str) -> Vec<String> {
    let mut paragraphs = Vec::new();
    let mut current = String::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(std::mem::take(&mut current));
            }
        } else {
            if !current.is_empty() {
                current.push('\n');
            }
            current.push_str(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current);
    }
    paragraphs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_plain_sentences() {
        assert_eq!(segment_sentences("He ran. She won."), ["He ran.", "She won."]);
        assert_eq!(
            segment_sentences("Really? Yes! 3 left."),
            ["Really?", "Yes!", "3 left."]
        );
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(segment_sentences("Mr. Smith left. Done."), ["Mr. Smith left.", "Done."]);
        assert_eq!(
            segment_sentences("He moved to Washington, D.C. in May. It rained."),
            ["He moved to Washington, D.C. in May.", "It rained."]
        );
        assert_eq!(
            segment_sentences("J. R. R. Tolkien wrote books, e.g. The Hobbit. Fine."),
            ["J. R. R. Tolkien wrote books, e.g. The Hobbit.", "Fine."]
        );
    }

    #[test]
    fn lowercase_continuation_is_not_a_boundary() {
        assert_eq!(
            segment_sentences("It costs 3.5 dollars. ok then"),
            ["It costs 3.5 dollars. ok then"]
        );
    }

    #[test]
    fn closing_quotes_stay_with_sentence() {
        assert_eq!(
            segment_sentences("He said \"stop.\" Then he left."),
            ["He said \"stop.\"", "Then he left."]
        );
    }

    #[test]
    fn paragraph_break_ends_sentence() {
        assert_eq!(
            segment_sentences("First line without stop\n\nsecond paragraph here"),
            ["First line without stop", "second paragraph here"]
        );
        assert_eq!(segment_sentences("a\nb"), ["a b"]);
    }

    #[test]
    fn empty_input() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences(" \n\n \t").is_empty());
    }

    #[test]
    fn custom_abbreviation_file() {
        let seg = SentenceSegmenter::new(Abbreviations::parse("# custom\nfig\n"));
        assert_eq!(seg.segment("See Fig. 3 here. Next."), ["See Fig. 3 here.", "Next."]);
        assert_eq!(seg.segment("Mr. Smith."), ["Mr.", "Smith."]);
    }

    #[test]
    fn bundled_list_size() {
        let n = Abbreviations::default().len();
        assert!((40..=60).contains(&n), "{n}");
    }

    proptest! {
        #[test]
        fn preserves_content_and_paragraphs(
            text in "([A-Z][a-z]{0,6}|[a-z]{1,6}|Mr\\.|U\\.S\\.|[.!?]|\"| |\n|\n\n|[0-9]){0,40}"
        ) {
            let sentences = segment_sentences(&text);
            let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            let joined: String = sentences.iter().map(|s| strip(s)).collect();
            prop_assert_eq!(joined, strip(&text));
            for s in &sentences {
                prop_assert!(!s.is_empty());
                prop_assert!(!s.contains('\n'));
            }
            // no sentence spans a paragraph break
            let paras: Vec<String> = split_paragraphs(&text).iter().map(|p| strip(p)).collect();
            for s in &sentences {
                let s = strip(s);
                prop_assert!(paras.iter().any(|p| p.contains(&s)));
            }
        }
    }
}
