//! Rule-based English lemmatizer.
//!
//! Handles regular inflection with suffix rules (plural -s/-es/-ies,
//! verbal -ing/-ed, comparative -er/-est) and irregular forms through the
//! embedded table. It is deterministic and dependency-free; occasional
//! imperfect stems are harmless for overlap testing because both sides of
//! a comparison pass through the same rules.

use alloc::string::String;

use super::Lexicon;

const DOUBLED: [&str; 9] = ["bb", "dd", "ff", "gg", "mm", "nn", "pp", "rr", "tt"];

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'))
}

fn undouble(stem: &str) -> &str {
    if DOUBLED.iter().any(|d| stem.ends_with(d)) {
        &stem[..stem.len() - 1]
    } else {
        stem
    }
}

/// Lemmatizes one lowercase word.
pub fn lemmatize_word(word: &str, lexicon: &Lexicon) -> String {
    if let Some(lemma) = lexicon.irregular(word) {
        return String::from(lemma);
    }
    let n = word.len();

    // Plurals.
    if word.ends_with("ies") && n > 4 {
        let mut s = String::from(&word[..n - 3]);
        s.push('y');
        return s;
    }
    if word.ends_with("sses") {
        return String::from(&word[..n - 2]);
    }
    if n > 3
        && (word.ends_with("xes")
            || word.ends_with("zes")
            || word.ends_with("ches")
            || word.ends_with("shes"))
    {
        return String::from(&word[..n - 2]);
    }
    if word.ends_with("oes") && n > 4 {
        return String::from(&word[..n - 2]);
    }
    if word.ends_with('s')
        && n > 3
        && !word.ends_with("ss")
        && !word.ends_with("us")
        && !word.ends_with("is")
    {
        return String::from(&word[..n - 1]);
    }

    // Verbal forms.
    if word.ends_with("ied") && n > 4 {
        let mut s = String::from(&word[..n - 3]);
        s.push('y');
        return s;
    }
    if word.ends_with("ing") && n > 5 {
        let stem = &word[..n - 3];
        if has_vowel(stem) {
            return String::from(undouble(stem));
        }
    }
    if word.ends_with("ed") && n > 4 {
        let stem = &word[..n - 2];
        if has_vowel(stem) {
            return String::from(undouble(stem));
        }
    }

    // Comparatives.
    if word.ends_with("est") && n > 5 {
        let stem = &word[..n - 3];
        if has_vowel(stem) {
            return String::from(undouble(stem));
        }
    }
    if word.ends_with("er") && n > 5 {
        let stem = &word[..n - 2];
        if has_vowel(stem) {
            return String::from(undouble(stem));
        }
    }

    String::from(word)
}

#[cfg(test)]
mod tests {
    use super::super::Lexicon;
    use super::*;

    #[test]
    fn regular_forms() {
        let lex = Lexicon::builtin();
        for (word, lemma) in [
            ("dogs", "dog"),
            ("boxes", "box"),
            ("churches", "church"),
            ("bodies", "body"),
            ("classes", "class"),
            ("walked", "walk"),
            ("stopped", "stop"),
            ("asking", "ask"),
            ("running", "run"),
            ("tried", "try"),
            ("bigger", "big"),
            ("smallest", "small"),
            ("rights", "right"),
        ] {
            assert_eq!(lemmatize_word(word, &lex), lemma, "word: {word}");
        }
    }

    #[test]
    fn irregular_forms() {
        let lex = Lexicon::builtin();
        for (word, lemma) in [
            ("went", "go"),
            ("children", "child"),
            ("made", "make"),
            ("better", "good"),
            ("women", "woman"),
        ] {
            assert_eq!(lemmatize_word(word, &lex), lemma, "word: {word}");
        }
    }

    #[test]
    fn guards_hold() {
        let lex = Lexicon::builtin();
        // Short or vowel-less stems are left alone.
        for word in ["thing", "spring", "bus", "gas", "its", "red", "water", "never"] {
            assert_eq!(lemmatize_word(word, &lex), word, "word: {word}");
        }
    }
}
