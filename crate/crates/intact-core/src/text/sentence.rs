//! Rule-based sentence segmentation.
//!
//! Splits at terminal punctuation followed by whitespace and an
//! upper-case letter, digit or opening quote, with an abbreviation
//! exception list. Returned ranges partition the text; trailing
//! whitespace belongs to the preceding sentence. Annotated spans that
//! straddle a boundary force the two sentences to merge, so every span
//! lies within exactly one range.

use alloc::string::String;
use alloc::vec::Vec;

use crate::document::{AnnotatedDocument, PiiSpan};
use crate::util::char_slice;

use super::Lexicon;

/// The sentence that contains a target span, with the span's position
/// re-based onto the sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceContext {
    pub sentence: String,
    /// Character range of the span within `sentence`.
    pub span_range: (usize, usize),
}

/// Splits `text` into sentence ranges (character offsets).
pub fn split_sentences(text: &str, lexicon: &Lexicon) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }
    let mut boundaries = Vec::new();
    let mut i = 0usize;
    while i < n {
        let c = chars[i];
        if matches!(c, '.' | '?' | '!') {
            // Absorb runs of terminal punctuation and closing quotes.
            let mut j = i + 1;
            while j < n && matches!(chars[j], '.' | '?' | '!' | '"' | '\'' | ')' | ']' | '\u{201d}') {
                j += 1;
            }
            let mut k = j;
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            let starts_sentence = k < n
                && (chars[k].is_uppercase()
                    || chars[k].is_ascii_digit()
                    || matches!(chars[k], '"' | '\u{201c}' | '('));
            if k > j && starts_sentence && !(c == '.' && is_abbreviation(&chars, i, lexicon)) {
                boundaries.push(k);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    let mut ranges = Vec::with_capacity(boundaries.len() + 1);
    let mut start = 0usize;
    for b in boundaries {
        ranges.push((start, b));
        start = b;
    }
    ranges.push((start, n));
    ranges
}

/// True when the word ending right before the '.' at `dot` is a known
/// abbreviation (checked lowercase, dots inside the token kept).
fn is_abbreviation(chars: &[char], dot: usize, lexicon: &Lexicon) -> bool {
    let mut start = dot;
    while start > 0 && (chars[start - 1].is_alphanumeric() || chars[start - 1] == '.') {
        start -= 1;
    }
    if start == dot {
        return false;
    }
    let word: String = chars[start..dot].iter().flat_map(|c| c.to_lowercase()).collect();
    lexicon.is_abbreviation(word.trim_end_matches('.'))
}

/// Sentence ranges for a document, merged so that every annotated span
/// lies entirely within one range.
pub fn sentence_ranges(text: &str, spans: &[PiiSpan], lexicon: &Lexicon) -> Vec<(usize, usize)> {
    let mut ranges = split_sentences(text, lexicon);
    for span in spans {
        while let Some(idx) =
            ranges.iter().position(|&(s, e)| span.start >= s && span.start < e)
        {
            if span.end <= ranges[idx].1 {
                break;
            }
            // Span continues past this sentence: merge with the next one.
            let (_, next_end) = ranges.remove(idx + 1);
            ranges[idx].1 = next_end;
        }
    }
    ranges
}

/// Extracts the sentence context of `doc.spans[span_index]`.
pub fn sentence_context(
    doc: &AnnotatedDocument,
    span_index: usize,
    ranges: &[(usize, usize)],
) -> SentenceContext {
    let span = &doc.spans[span_index];
    let &(start, end) = ranges
        .iter()
        .find(|&&(s, e)| span.start >= s && span.end <= e)
        .expect("ranges cover every span");
    let sentence = char_slice(&doc.text, start, end).trim_end();
    SentenceContext {
        sentence: String::from(sentence),
        span_range: (span.start - start, span.end - start),
    }
}
