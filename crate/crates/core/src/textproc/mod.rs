//! Deterministic text processing: sentence splitting, cleanup of dump-style
//! hypothesis sentences and masked-language-model corpus preparation.

mod mask;
mod segment;

pub use mask::{mask_tokens, MaskOutput, MaskingConfig, MaskingError};
pub use segment::{segment_sentences, Abbreviations, SentenceSegmenter};

const BRACKET_TOKENS: [(&str, &str); 4] = [("-LRB-", "("), ("-RRB-", ")"), ("-LSB-", "["), ("-RSB-", "]")];

/// Strips the trailing link tags of a wiki-dump sentence and restores
/// bracket tokens.
///
/// Dump sentences carry their hyperlink targets after the text, separated by
/// tabs, so everything from the first tab on is dropped.
pub fn clean_hypothesis(raw: &str) -> String {
    let text = raw.split('\t').next().unwrap_or("");
    let mut text = text.to_string();
    for (token, bracket) in BRACKET_TOKENS {
        if text.contains(token) {
            text = text.replace(token, bracket);
        }
    }
    collapse_whitespace(&text)
}

/// Joins whitespace-separated words with single spaces.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn drops_link_tags() {
        assert_eq!(
            clean_hypothesis("Roman Atwood is a content creator.\tRoman_Atwood"),
            "Roman Atwood is a content creator."
        );
        assert_eq!(
            clean_hypothesis("He is a vlogger .\tYouTube\tYouTube\tprank\tPrank_call"),
            "He is a vlogger ."
        );
    }

    #[test]
    fn clean_input_is_untouched() {
        assert_eq!(clean_hypothesis("plain sentence"), "plain sentence");
        assert_eq!(clean_hypothesis(""), "");
    }

    #[test]
    fn maps_bracket_tokens() {
        assert_eq!(
            clean_hypothesis("He was born -LRB- 1983 -RRB- ."),
            "He was born ( 1983 ) ."
        );
        assert_eq!(
            clean_hypothesis(
                "Alexandra Bailon -LRB- née Bailon ; born October 24 , 1983 -RRB- is an actress .\tBailon"
            ),
            "Alexandra Bailon ( née Bailon ; born October 24 , 1983 ) is an actress ."
        );
        assert_eq!(clean_hypothesis("x -LSB- 1 -RSB-"), "x [ 1 ]");
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent_and_never_grows(s in "([a-z ]|-LRB-|-RRB-|-LSB-|-RSB-|\t|\n|  ){0,30}") {
            let once = clean_hypothesis(&s);
            prop_assert_eq!(clean_hypothesis(&once), once.clone());
            prop_assert!(once.chars().count() <= s.chars().count());
        }
    }
}
