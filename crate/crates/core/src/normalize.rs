//! Surface-form normalization shared by the alias index, the recognizer and
//! the negation scanner.
//!
//! A surface is normalized by applying Unicode NFKC, lowercasing, trimming
//! surrounding whitespace and collapsing every internal whitespace run to a
//! single ASCII space. The result is a fixpoint: normalizing it again returns
//! the same string.

use alloc::string::String;
use unicode_normalization::UnicodeNormalization;

/// Normalizes `text` into the canonical form used for alias lookup.
pub fn normalize(text: &str) -> String {
    let mut current = normalize_once(text);
    // Lowercasing can, for a handful of code points, yield sequences that NFKC
    // rewrites again. Iterate to the fixpoint (two passes in practice).
    loop {
        let next = normalize_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn normalize_once(text: &str) -> String {
    let lowered: String = text.nfkc().flat_map(char::to_lowercase).collect();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split(char::is_whitespace).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// True for characters that belong to scripts written without spaces
/// between words (Han, kana, Hangul). Word-boundary rules do not apply to
/// them.
pub fn is_unspaced_script(c: char) -> bool {
    matches!(c as u32,
        0x2E80..=0x2FDF
        | 0x3040..=0x30FF
        | 0x3100..=0x31FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2FA1F)
}

/// A character that continues a word in a space-delimited script.
pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() && !is_unspaced_script(c)
}

/// Finds `needle` in `haystack` (both already normalized) at a position where
/// it does not cut through a word of a space-delimited script.
pub fn contains_at_boundary(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let first = needle.chars().next();
    let last = needle.chars().next_back();
    haystack.match_indices(needle).any(|(at, _)| {
        let before = haystack[..at].chars().next_back();
        let after = haystack[at + needle.len()..].chars().next();
        let left_ok = !matches!((before, first), (Some(b), Some(f)) if is_word_char(b) && is_word_char(f));
        let right_ok = !matches!((last, after), (Some(l), Some(a)) if is_word_char(l) && is_word_char(a));
        left_ok && right_ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn folds_case_width_and_whitespace() {
        assert_eq!(normalize("  Stomach\t\tACHE \n"), "stomach ache");
        assert_eq!(normalize("ＦＥＶＥＲ"), "fever");
        assert_eq!(normalize("胃痛"), "胃痛");
        assert_eq!(normalize("   "), "");
    }

    #[test]
    fn boundary_matching() {
        assert!(contains_at_boundary("i have no fever", "no"));
        assert!(!contains_at_boundary("i have a nose bleed", "no"));
        assert!(!contains_at_boundary("piano", "no"));
        assert!(contains_at_boundary("我没有发烧", "没有"));
        assert!(!contains_at_boundary("anything", ""));
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(s in "\\PC{0,24}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once.clone());
        }

        #[test]
        fn output_has_no_outer_or_double_whitespace(s in "[ \\ta-zA-Z\u{3000}]{0,30}") {
            let n = normalize(&s);
            prop_assert!(!n.starts_with(' ') && !n.ends_with(' '));
            prop_assert!(!n.contains("  "));
        }
    }
}
