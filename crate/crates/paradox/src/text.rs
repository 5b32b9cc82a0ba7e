//! Text normalization and whole-word matching shared by script validation,
//! the lexical gate, transcript scoring, and answer parsing.

/// Lowercase, replace every non-alphanumeric character with a space, and
/// collapse runs of whitespace. Alphanumeric is Unicode-aware, so accented
/// letters survive while punctuation and symbols are stripped.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            for lc in c.to_lowercase() {
                out.push(lc);
            }
        } else {
            pending_space = true;
        }
    }
    out
}

/// Normalized word tokens.
pub fn tokens(s: &str) -> Vec<String> {
    normalize(s).split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
}

/// Whole-word, case-insensitive containment. `term` may itself be several
/// words; it matches a contiguous run of tokens.
pub fn contains_term(text: &str, term: &str) -> bool {
    let hay = tokens(text);
    let needle = tokens(term);
    if needle.is_empty() || hay.len() < needle.len() {
        return false;
    }
    hay.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Count occurrences of `term` as a whole-word (sub)sequence.
pub fn count_term(text: &str, term: &str) -> usize {
    let hay = tokens(text);
    let needle = tokens(term);
    if needle.is_empty() || hay.len() < needle.len() {
        return 0;
    }
    hay.windows(needle.len()).filter(|w| *w == needle.as_slice()).count()
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];

const ORDINAL_WORDS: [&str; 10] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];

/// English word for a small count, if we have one.
pub fn number_word(n: usize) -> Option<&'static str> {
    NUMBER_WORDS.get(n).copied()
}

/// Ordinal word for a 1-based position ("first", "second", ...).
pub fn ordinal_word(position: usize) -> Option<&'static str> {
    if position == 0 {
        return None;
    }
    ORDINAL_WORDS.get(position - 1).copied()
}

/// 1-based position for an ordinal word.
pub fn ordinal_value(word: &str) -> Option<usize> {
    let w = word.to_lowercase();
    ORDINAL_WORDS.iter().position(|o| *o == w).map(|i| i + 1)
}

/// Terms that assert a count: the digit form plus the English word when small.
pub fn count_terms(n: usize) -> Vec<String> {
    let mut v = vec![n.to_string()];
    if let Some(w) = number_word(n) {
        v.push(w.to_string());
    }
    v
}

/// True when `text` contains at least one of `include` and none of `exclude`,
/// whole-word and case-insensitive.
pub fn passes_lexical_check(text: &str, include: &[String], exclude: &[String]) -> bool {
    include.iter().any(|t| contains_term(text, t))
        && !exclude.iter().any(|t| contains_term(text, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_strips_punctuation_and_case() {
        assert_eq!(normalize("The CAT, sat!!  on--the mat."), "the cat sat on the mat");
    }

    #[test]
    fn whole_word_matching_does_not_cross_boundaries() {
        assert!(contains_term("I am a female speaker", "female"));
        assert!(!contains_term("I am a female speaker", "male"));
        assert!(contains_term("however low it gets", "low"));
        assert!(!contains_term("however it gets", "low"));
    }

    #[test]
    fn multiword_terms_match_contiguously() {
        assert!(contains_term("the pattern is low-high-medium here", "low high medium"));
        assert!(!contains_term("low and then high and then medium", "low high medium"));
    }

    #[test]
    fn lexical_check_requires_inclusion_and_forbids_exclusion() {
        let inc = vec!["old".to_string()];
        let exc = vec!["young".to_string()];
        assert!(passes_lexical_check("I am an old man", &inc, &exc));
        assert!(!passes_lexical_check("I am old but young at heart", &inc, &exc));
        assert!(!passes_lexical_check("I am elderly", &inc, &exc));
    }

    #[test]
    fn ordinals_round_trip() {
        assert_eq!(ordinal_word(3), Some("third"));
        assert_eq!(ordinal_value("Third"), Some(3));
        assert_eq!(ordinal_word(0), None);
    }
}
