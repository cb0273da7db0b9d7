use std::borrow::Cow;
use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

const BUILTIN_ENGLISH: &str = include_str!("stopwords_en.txt");

/// A lowercase stopword set.
#[derive(Debug, Clone)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    /// The English list shipped with the crate.
    pub fn english() -> Self {
        Self::from_lines(BUILTIN_ENGLISH)
    }

    pub fn empty() -> Self {
        Stopwords {
            words: HashSet::new(),
        }
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn from_lines(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Stopwords { words }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_lines(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl FromIterator<String> for Stopwords {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        Stopwords {
            words: iter.into_iter().map(|w| w.to_lowercase()).collect(),
        }
    }
}

// Characters without a lowercase mapping (e.g. mathematical capitals) are dropped.
fn lowercase(piece: &str) -> String {
    piece
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_uppercase())
        .collect()
}

/// Lazily yields the tokens of `body`: pieces split on any non-alphanumeric
/// character, at least two characters long, lowercased, stopwords removed.
/// No stemming is applied.
pub fn tokens<'a>(body: &'a str, stopwords: &'a Stopwords) -> impl Iterator<Item = Cow<'a, str>> + 'a {
    body.split(|c: char| !c.is_alphanumeric())
        .filter(|piece| {
            let mut chars = piece.chars();
            chars.next().is_some() && chars.next().is_some()
        })
        .map(|piece| {
            if piece.chars().any(char::is_uppercase) {
                Cow::Owned(lowercase(piece))
            } else {
                Cow::Borrowed(piece)
            }
        })
        .filter(move |tok| tok.chars().nth(1).is_some() && !stopwords.contains(tok))
}

pub fn tokenize(body: &str, stopwords: &Stopwords) -> Vec<String> {
    tokens(body, stopwords).map(Cow::into_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stop(words: &[&str]) -> Stopwords {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn lowercases_and_drops_stopwords() {
        assert_eq!(tokenize("The CAT sat.", &stop(&["the"])), vec!["cat", "sat"]);
    }

    #[test]
    fn empty_body() {
        assert!(tokenize("", &Stopwords::english()).is_empty());
    }

    #[test]
    fn no_stemming() {
        assert_eq!(
            tokenize("running runs", &Stopwords::empty()),
            vec!["running", "runs"]
        );
    }

    #[test]
    fn single_characters_and_punctuation_are_dropped() {
        assert_eq!(
            tokenize("a b-c don't x2 ok!!", &Stopwords::empty()),
            vec!["don", "x2", "ok"]
        );
    }

    #[test]
    fn builtin_list_is_lowercase_and_sized() {
        let sw = Stopwords::english();
        assert!(sw.len() >= 140);
        assert!(sw.contains("the") && sw.contains("and"));
    }

    proptest::proptest! {
        #[test]
        fn output_has_no_stopword_or_uppercase(body in "\\PC{0,80}") {
            let sw = Stopwords::english();
            for tok in tokenize(&body, &sw) {
                proptest::prop_assert!(!sw.contains(&tok));
                proptest::prop_assert!(!tok.chars().any(char::is_uppercase));
                proptest::prop_assert!(tok.chars().count() >= 2);
            }
        }
    }
}
