//! Deterministic linguistic utilities: tokenization, lemmatization,
//! stopword and frequency filtering, acronym coinage, character n-grams,
//! sentence segmentation, and the guess-matching predicate used to decide
//! whether an inference attack succeeded.
//!
//! Word lists ship as plain-text resources embedded in the crate, one
//! token per line, and are loaded into a [`Lexicon`]. Construct the
//! lexicon once and share it; all functions here are pure.

mod lemma;
mod sentence;

pub use lemma::lemmatize_word;
pub use sentence::{sentence_context, sentence_ranges, split_sentences, SentenceContext};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::document::{EntityLabel, PiiSpan};

const STOPWORDS: &str = include_str!("resources/stopwords.txt");
const FREQUENT: &str = include_str!("resources/frequent.txt");
const ABBREVIATIONS: &str = include_str!("resources/abbreviations.txt");
const IRREGULAR: &str = include_str!("resources/irregular.txt");

/// Identifier of the embedded word lists, recorded in configs and
/// manifests.
pub const BUILTIN_LISTS_ID: &str = "builtin-english-v1";

/// Matching parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Character n-gram length for the named-entity branch.
    pub ngram_n: usize,
    /// Lemmas ranked above this cutoff in the frequency list are excluded
    /// from lemma overlap.
    pub high_freq_rank_cutoff: usize,
    /// Identifier of the embedded stopword/frequency lists.
    pub stopword_list_id: String,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            ngram_n: 4,
            high_freq_rank_cutoff: 1000,
            stopword_list_id: String::from(BUILTIN_LISTS_ID),
        }
    }
}

/// Embedded word lists, parsed once.
#[derive(Debug, Clone)]
pub struct Lexicon {
    stopwords: BTreeSet<String>,
    frequent_rank: BTreeMap<String, usize>,
    abbreviations: BTreeSet<String>,
    irregular: BTreeMap<String, String>,
}

impl Lexicon {
    /// Loads the embedded lists.
    pub fn builtin() -> Lexicon {
        let stopwords = STOPWORDS.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        let frequent_rank = FREQUENT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(rank, word)| (String::from(word), rank))
            .collect();
        let abbreviations =
            ABBREVIATIONS.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        let irregular = IRREGULAR
            .lines()
            .filter_map(|l| {
                let mut parts = l.split_whitespace();
                Some((String::from(parts.next()?), String::from(parts.next()?)))
            })
            .collect();
        Lexicon { stopwords, frequent_rank, abbreviations, irregular }
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    /// True when `lemma` sits within the first `cutoff` entries of the
    /// embedded frequency list.
    pub fn is_high_frequency(&self, lemma: &str, cutoff: usize) -> bool {
        self.frequent_rank.get(lemma).is_some_and(|&rank| rank < cutoff)
    }

    pub fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.contains(word)
    }

    fn irregular(&self, word: &str) -> Option<&str> {
        self.irregular.get(word).map(String::as_str)
    }
}

/// A token with its character range within the tokenized text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Splits text into maximal runs of alphanumeric characters; offsets
/// count characters.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    for (idx, c) in text.chars().enumerate() {
        if c.is_alphanumeric() {
            if current.is_empty() {
                start = idx;
            }
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(Token { start, end: idx, text: core::mem::take(&mut current) });
        }
    }
    if !current.is_empty() {
        let end = text.chars().count();
        tokens.push(Token { start, end, text: current });
    }
    tokens
}

/// Lemma set of a span: lowercase base forms minus non-alphabetic tokens,
/// stopwords and high-frequency lemmas, plus coined acronyms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LemmaSet {
    pub lemmas: BTreeSet<String>,
    pub coined_acronyms: BTreeSet<String>,
}

impl LemmaSet {
    /// Union of lemmas and coined acronyms, as used for overlap tests.
    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.lemmas.iter().chain(self.coined_acronyms.iter())
    }

    pub fn overlaps(&self, other: &LemmaSet) -> bool {
        self.all().any(|l| other.lemmas.contains(l) || other.coined_acronyms.contains(l))
    }
}

/// Builds the [`LemmaSet`] of a text span.
///
/// Acronym coinage merges the first letters of all title-cased words into
/// one lowercase word whenever at least two words are title-cased.
pub fn lemmatize(span: &str, cfg: &MatchConfig, lexicon: &Lexicon) -> LemmaSet {
    let mut set = LemmaSet::default();
    let mut initials = String::new();
    let mut title_cased = 0usize;
    for raw in span.split_whitespace() {
        let word: String = raw.chars().filter(|c| c.is_alphanumeric()).collect();
        if word.is_empty() {
            continue;
        }
        if word.chars().next().is_some_and(char::is_uppercase) {
            title_cased += 1;
            initials.extend(word.chars().next().unwrap().to_lowercase());
        }
        if !word.chars().all(char::is_alphabetic) {
            continue;
        }
        let lower: String = word.chars().flat_map(char::to_lowercase).collect();
        if lexicon.is_stopword(&lower) {
            continue;
        }
        let lemma = lemmatize_word(&lower, lexicon);
        if lexicon.is_stopword(&lemma) || lexicon.is_high_frequency(&lemma, cfg.high_freq_rank_cutoff)
        {
            continue;
        }
        set.lemmas.insert(lemma);
    }
    if title_cased >= 2 {
        set.coined_acronyms.insert(initials);
    }
    set
}

/// Lowercase lemmas of every token, with no exclusions. Dates compare
/// with this stricter set so that "August 2003" does not count as a guess
/// of "3 August 2003".
pub fn datetime_lemmas(span: &str, lexicon: &Lexicon) -> BTreeSet<String> {
    tokenize(span)
        .into_iter()
        .map(|t| {
            let lower: String = t.text.chars().flat_map(char::to_lowercase).collect();
            lemmatize_word(&lower, lexicon)
        })
        .collect()
}

/// Character n-grams of a span, computed per whitespace-separated token
/// on lowercase text. Tokens shorter than `n` contribute themselves.
pub fn char_ngrams(span: &str, n: usize) -> BTreeSet<String> {
    debug_assert!(n >= 1);
    let mut grams = BTreeSet::new();
    for token in span.split_whitespace() {
        let lower: Vec<char> = token.chars().flat_map(char::to_lowercase).collect();
        if lower.len() < n {
            grams.insert(lower.into_iter().collect());
        } else {
            for window in lower.windows(n) {
                grams.insert(window.iter().collect());
            }
        }
    }
    grams
}

fn ngram_overlap(a: &str, b: &str, n: usize) -> bool {
    let grams_a = char_ngrams(a, n);
    !grams_a.is_disjoint(&char_ngrams(b, n))
}

/// Decides whether a guess successfully recovers the original span.
///
/// For `DATETIME` spans the guess counts only when all lemmas on both
/// sides are the same. Otherwise a guess counts on lemma overlap
/// (including coined acronyms), or, for named-entity labels, on character
/// n-gram overlap. All comparisons are lowercase.
pub fn guess_matches(original: &PiiSpan, guess: &str, cfg: &MatchConfig, lexicon: &Lexicon) -> bool {
    if original.label == EntityLabel::Datetime {
        return datetime_lemmas(&original.surface, lexicon) == datetime_lemmas(guess, lexicon);
    }
    let original_set = lemmatize(&original.surface, cfg, lexicon);
    let guess_set = lemmatize(guess, cfg, lexicon);
    if original_set.overlaps(&guess_set) {
        return true;
    }
    original.label.is_named_entity() && ngram_overlap(&original.surface, guess, cfg.ngram_n)
}

/// True when at least one guess matches the original span. An empty
/// guess list is never risky.
pub fn risky_replace(
    original: &PiiSpan,
    guesses: &[String],
    cfg: &MatchConfig,
    lexicon: &Lexicon,
) -> bool {
    guesses.iter().any(|g| guess_matches(original, g, cfg, lexicon))
}
