use std::collections::HashMap;

use serde::Serialize;

use crate::calendar::{day_of, timestamp_of_day, Day};
use crate::corpus::{Corpus, PostKind};

/// Number of subreddits whose post counts enter the feature vector.
pub const DEFAULT_FEATURE_SUBREDDITS: usize = 50;

/// Subreddits contributing per-subreddit count features.
#[derive(Debug, Clone)]
pub struct FeatureSpace {
    names: Vec<String>,
    slots: HashMap<u32, usize>,
}

impl FeatureSpace {
    pub fn new(corpus: &Corpus, subreddits: &[String]) -> Self {
        FeatureSpace {
            names: subreddits.to_vec(),
            slots: subreddits
                .iter()
                .enumerate()
                .filter_map(|(i, s)| corpus.subreddit_id(s).map(|id| (id, i)))
                .collect(),
        }
    }

    pub fn subreddits(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        4 + self.names.len()
    }

    /// Column labels in vector order.
    pub fn labels(&self) -> Vec<String> {
        let mut l = vec![
            "account_created_day".to_string(),
            "karma".to_string(),
            "submissions".to_string(),
            "comments".to_string(),
        ];
        l.extend(self.names.iter().map(|s| format!("posts_in_{s}")));
        l
    }
}

/// Pre-activation profile of one user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVector {
    pub account_created_day: Day,
    pub karma: i64,
    pub submissions: u64,
    pub comments: u64,
    pub subreddit_posts: Vec<u64>,
}

impl FeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 + self.subreddit_posts.len());
        v.push(self.account_created_day as f64);
        v.push(self.karma as f64);
        v.push(self.submissions as f64);
        v.push(self.comments as f64);
        v.extend(self.subreddit_posts.iter().map(|&c| c as f64));
        v
    }
}

/// Features over the user's posts strictly before day `cutoff`.
///
/// Karma is the sum of post scores. The creation date is the account's
/// recorded creation time when the dump carries it, otherwise the first
/// post before the cutoff, otherwise the cutoff itself.
pub fn features_at(corpus: &Corpus, user: &str, cutoff: Day, space: &FeatureSpace) -> FeatureVector {
    let limit = timestamp_of_day(cutoff);
    let posts = corpus.posts_by_author(user);
    let before = &posts[..posts.partition_point(|p| p.created_utc < limit)];
    let mut fv = FeatureVector {
        account_created_day: cutoff,
        karma: 0,
        submissions: 0,
        comments: 0,
        subreddit_posts: vec![0; space.names.len()],
    };
    let mut recorded: Option<i64> = None;
    for p in before {
        fv.karma += p.score;
        match p.kind {
            PostKind::Submission => fv.submissions += 1,
            PostKind::Comment => fv.comments += 1,
        }
        if let Some(&slot) = space.slots.get(&p.subreddit) {
            fv.subreddit_posts[slot] += 1;
        }
        if let Some(c) = p.author_created_utc {
            recorded = Some(recorded.map_or(c, |r| r.min(c)));
        }
    }
    fv.account_created_day = match (recorded, before.first()) {
        (Some(c), _) => day_of(c),
        (None, Some(first)) => first.day(),
        (None, None) => cutoff,
    };
    fv
}
