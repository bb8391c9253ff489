//! String canonicalization and token-level similarity.
//!
//! Every identity comparison in the pipeline (fact keys, voting pools,
//! paraphrase rejection) goes through [`normalize`], so two surface forms
//! that differ only in case, spacing, or a trailing period are the same
//! string as far as the graph is concerned.

use std::collections::HashMap;

/// Lowercases, collapses runs of whitespace to one space, trims, and strips
/// trailing `.` and `,`.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    loop {
        let stripped = out.trim_end_matches(['.', ',']).trim_end();
        if stripped.len() == out.len() {
            break;
        }
        out.truncate(stripped.len());
    }
    out
}

/// Tokens used for F1: normalized words, with the `#` list separator dropped.
pub fn f1_tokens(text: &str) -> Vec<String> {
    normalize(text)
        .split(' ')
        .filter(|t| !t.is_empty() && *t != "#")
        .map(str::to_owned)
        .collect()
}

/// Token-level F1 with multiset overlap. Two empty inputs score 1.0.
pub fn token_f1(a: &str, b: &str) -> f64 {
    let ta = f1_tokens(a);
    let tb = f1_tokens(b);
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &ta {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &tb {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    (2 * overlap) as f64 / (ta.len() + tb.len()) as f64
}

/// Tokens for containment matching: normalized words with surrounding
/// punctuation removed, so `"Obama,"` and `"(Obama)"` both yield `obama`.
pub fn match_tokens(text: &str) -> Vec<String> {
    normalize(text)
        .split(' ')
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("  Italy "), "italy");
        assert_eq!(normalize("Sasha  Obama."), "sasha obama");
        assert_eq!(normalize("NBA"), "nba");
        assert_eq!(normalize("a b ., "), "a b");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("\tX\nY"), "x y");
    }

    #[test]
    fn f1_examples() {
        assert_eq!(token_f1("italy", "Italy"), 1.0);
        assert!((token_f1("sasha obama", "sasha") - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(token_f1("a b", "c d"), 0.0);
        assert_eq!(token_f1("", "  "), 1.0);
        assert_eq!(token_f1("", "a"), 0.0);
    }

    #[test]
    fn f1_drops_separator() {
        assert_eq!(token_f1("a # b", "a b"), 1.0);
    }

    #[test]
    fn f1_counts_multiset() {
        // {a,a,b} vs {a,b,b}: overlap {a,b} = 2
        assert!((token_f1("a a b", "a b b") - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn containment_aligns_on_tokens() {
        let hay = match_tokens("Born to Stuart and Mary.");
        assert!(!contains_sequence(&hay, &match_tokens("art")));
        assert!(contains_sequence(&hay, &match_tokens("stuart")));
        assert!(contains_sequence(&hay, &match_tokens("Mary")));
        assert!(!contains_sequence(&hay, &[]));
    }

    proptest! {
        #[test]
        fn f1_symmetric_and_bounded(a in "[a-c ]{0,12}", b in "[a-c ]{0,12}") {
            let ab = token_f1(&a, &b);
            prop_assert_eq!(ab, token_f1(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn f1_identity(a in "[a-z]{1,5}( [a-z]{1,5}){0,4}") {
            prop_assert_eq!(token_f1(&a, &a), 1.0);
        }

        #[test]
        fn normalize_idempotent(a in "\\PC{0,20}") {
            let once = normalize(&a);
            prop_assert_eq!(normalize(&once), once);
        }
    }
}
