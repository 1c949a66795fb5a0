//! Rule-based tokenizer.
//!
//! The rule set is deliberately small and documented:
//!   - case folding (Unicode lowercase),
//!   - maximal alphanumeric runs form tokens,
//!   - an apostrophe surrounded by alphanumerics stays inside its token
//!     ("won't", "that's"),
//!   - every other non-whitespace character is a token of its own,
//!   - target markers (LOC1, LOC2, ...) fold to loc1, loc2, ... and survive
//!     as single tokens because they are alphanumeric runs.

use crate::error::{Error, Result};

const APOSTROPHES: [char; 2] = ['\'', '\u{2019}'];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Split case-folded text into tokens. Whitespace-only input is an error.
pub fn tokenize(text: &str) -> Result<Vec<String>> {
    let folded = text.to_lowercase();
    let chars: Vec<char> = folded.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if is_word_char(c) {
            let mut tok = String::new();
            tok.push(c);
            i += 1;
            while i < chars.len() {
                let c = chars[i];
                if is_word_char(c) {
                    tok.push(c);
                    i += 1;
                } else if APOSTROPHES.contains(&c)
                    && i + 1 < chars.len()
                    && is_word_char(chars[i + 1])
                {
                    tok.push(c);
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push(tok);
        } else {
            tokens.push(c.to_string());
            i += 1;
        }
    }
    if tokens.is_empty() {
        return Err(Error::EmptyInput("text with no tokens".into()));
    }
    Ok(tokens)
}

/// True for normalized target markers: loc1, loc2, ...
pub fn is_target_marker(token: &str) -> bool {
    token
        .strip_prefix("loc")
        .map(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_case_and_keeps_markers() {
        assert_eq!(
            tokenize("LOC1 is your best bet").unwrap(),
            vec!["loc1", "is", "your", "best", "bet"]
        );
    }

    #[test]
    fn keeps_contractions() {
        assert_eq!(
            tokenize("you won't go hungry").unwrap(),
            vec!["you", "won't", "go", "hungry"]
        );
        assert_eq!(tokenize("that's for sure").unwrap(), vec!["that's", "for", "sure"]);
    }

    #[test]
    fn splits_punctuation() {
        assert_eq!(tokenize("LOC2 is too far.").unwrap(), vec!["loc2", "is", "too", "far", "."]);
        assert_eq!(tokenize("cheap, cheerful").unwrap(), vec!["cheap", ",", "cheerful"]);
        assert_eq!(tokenize("transit-location").unwrap(), vec!["transit", "-", "location"]);
    }

    #[test]
    fn leading_apostrophe_is_its_own_token() {
        assert_eq!(tokenize("'ello world").unwrap(), vec!["'", "ello", "world"]);
    }

    #[test]
    fn empty_and_whitespace_error() {
        assert!(matches!(tokenize(""), Err(Error::EmptyInput(_))));
        assert!(matches!(tokenize("   \t\n"), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn idempotent_on_own_output() {
        let texts = [
            "LOC1 is your best bet for secure although expensive and LOC2 is too far.",
            "you won't go hungry that's for sure!",
            "plenty of restaurants, trains every 15 minutes",
        ];
        for text in texts {
            let once = tokenize(text).unwrap();
            let again = tokenize(&once.join(" ")).unwrap();
            assert_eq!(once, again);
        }
    }

    #[test]
    fn marker_detection() {
        assert!(is_target_marker("loc1"));
        assert!(is_target_marker("loc12"));
        assert!(!is_target_marker("loc"));
        assert!(!is_target_marker("location"));
        assert!(!is_target_marker("lock1"));
    }
}
