//! Index-side tokenization.
//!
//! Tokens are maximal runs of alphanumeric characters (plus combining
//! marks), NFC-composed and lowercased. Everything else is a boundary and is
//! dropped. This tokenizer is independent of any model vocabulary; retrieval
//! budgets are counted in these tokens.

use std::ops::Range;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// A normalized token together with the byte range it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Range<usize>,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

fn fold(raw: &str) -> String {
    let lowered: String = raw.nfc().flat_map(char::to_lowercase).collect();
    lowered.nfc().collect()
}

/// Tokenize `raw`, keeping byte offsets into the original string.
pub fn tokenize(raw: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in raw.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Token {
                    text: fold(&raw[s..i]),
                    span: s..i,
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: fold(&raw[s..]),
            span: s..raw.len(),
        });
    }
    out
}

/// Normalize `raw` into index tokens.
///
/// ```
/// assert_eq!(
///     kinfuse::normalize("Barack Obama's aunt"),
///     vec!["barack", "obama", "s", "aunt"]
/// );
/// ```
pub fn normalize(raw: &str) -> Vec<String> {
    tokenize(raw).into_iter().map(|t| t.text).collect()
}

/// Normalized tokens joined with single spaces; the canonical phrase key.
pub fn phrase_key(raw: &str) -> String {
    normalize(raw).join(" ")
}
