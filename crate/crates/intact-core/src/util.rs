//! Small shared helpers: character-offset slicing and hashing.
//!
//! All span offsets in this crate count Unicode scalar values, not bytes,
//! so slicing goes through the converters below.

use alloc::string::String;

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offset of the `idx`-th character, or the text length if `idx`
/// is one past the end.
pub fn byte_of_char(text: &str, idx: usize) -> Option<usize> {
    if idx == 0 {
        return Some(0);
    }
    let mut seen = 0usize;
    for (byte, _) in text.char_indices() {
        if seen == idx {
            return Some(byte);
        }
        seen += 1;
    }
    seen += 1;
    if idx < seen {
        Some(text.len())
    } else {
        None
    }
}

/// Slice `text` by character offsets `[start, end)`.
///
/// Panics if the offsets are out of range or inverted; callers validate
/// ranges at ingestion.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let b0 = byte_of_char(text, start).expect("start offset in range");
    let b1 = byte_of_char(text, end).expect("end offset in range");
    &text[b0..b1]
}

/// FNV-1a over bytes; used for deterministic mock seeding and scripted
/// reply lookup.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// FNV-1a over a sequence of strings with a separator byte, so that
/// ["ab","c"] and ["a","bc"] hash differently.
pub fn fnv1a_parts<'a>(parts: impl IntoIterator<Item = &'a str>) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for part in parts {
        for &b in part.as_bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash ^= 0x1f;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Replaces pre-existing double brackets so that a rendered attack context
/// contains exactly one `[[ ]]` pair (the target span).
pub fn escape_double_brackets(text: &str) -> String {
    text.replace("[[", "[ [").replace("]]", "] ]")
}
