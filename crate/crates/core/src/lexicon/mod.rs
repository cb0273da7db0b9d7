//! Lexicon induction and hate-ratio measurement.

mod ratings;
mod sage;
mod series;

pub use ratings::{
    apply_ratings, parse_ratings, read_ratings, write_candidates_tsv, HateLexicon, LexiconEntry, RatedWord,
    RATING_THRESHOLD,
};
pub use sage::{
    fit_sage, fit_sage_counts, log_likelihood, penalized_objective, select_candidates, smoothed_log_probs, Candidate,
    SageModel, SageOptions,
};
pub use series::{
    count_tokens, daily_series, day_tallies, hate_ratio, points_from_tallies, DailyPoint, DayTally, Scope, ScopeContext,
    TokenTally,
};

use std::collections::BTreeMap;

use crate::corpus::{tokens, Post, Stopwords};

/// Default number of candidates handed to raters.
pub const DEFAULT_CANDIDATES: usize = 300;

/// Word occurrence counts over a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VocabCounts {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl VocabCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: &str, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(word.to_string()).or_default() += n;
        self.total += n;
    }

    pub fn add_text(&mut self, body: &str, stopwords: &Stopwords) {
        for tok in tokens(body, stopwords) {
            if let Some(c) = self.counts.get_mut(tok.as_ref()) {
                *c += 1;
                self.total += 1;
            } else {
                self.add(&tok, 1);
            }
        }
    }

    pub fn from_posts<'a, I: IntoIterator<Item = &'a Post>>(posts: I, stopwords: &Stopwords) -> Self {
        let mut v = Self::new();
        for p in posts {
            v.add_text(&p.body, stopwords);
        }
        v
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<(S, u64)> for VocabCounts {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        let mut v = VocabCounts::new();
        for (w, n) in iter {
            v.add(w.as_ref(), n);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_is_sum_of_counts() {
        let mut v = VocabCounts::new();
        v.add_text("Cat cat dog, the end", &Stopwords::english());
        assert_eq!(v.count("cat"), 2);
        assert_eq!(v.total(), v.counts().values().sum::<u64>());
        assert_eq!(v.count("the"), 0);
    }
}
