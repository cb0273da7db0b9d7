use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HateLexicon;
use crate::calendar::Day;
use crate::corpus::{tokens, Corpus, Post, Stopwords};
use crate::error::{Error, Result};

/// Which of a user's posts a measurement covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    All,
    Inside,
    Outside,
    Banned,
    NonBanned,
}

impl Scope {
    pub const ALL: [Scope; 5] = [Scope::All, Scope::Inside, Scope::Outside, Scope::Banned, Scope::NonBanned];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::All => "all",
            Scope::Inside => "inside",
            Scope::Outside => "outside",
            Scope::Banned => "banned",
            Scope::NonBanned => "non-banned",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Scope::All),
            "inside" | "inside-target" => Ok(Scope::Inside),
            "outside" | "outside-target" => Ok(Scope::Outside),
            "banned" => Ok(Scope::Banned),
            "non-banned" | "nonbanned" => Ok(Scope::NonBanned),
            other => Err(Error::UnknownScope(other.to_string())),
        }
    }
}

/// How posts map to scopes: the target subreddit and the optional banned list.
#[derive(Debug, Clone)]
pub struct ScopeContext {
    target: Option<u32>,
    banned: Option<Vec<bool>>,
}

impl ScopeContext {
    pub fn new(corpus: &Corpus, target: &str, banned: Option<&BTreeSet<String>>) -> Self {
        let banned = banned.map(|list| {
            corpus
                .subreddits()
                .iter()
                .map(|s| list.contains(s))
                .collect::<Vec<bool>>()
        });
        ScopeContext {
            target: corpus.subreddit_id(target),
            banned,
        }
    }

    pub fn has_banned_list(&self) -> bool {
        self.banned.is_some()
    }

    /// Whether `post` counts toward `scope`.
    pub fn covers(&self, post: &Post, scope: Scope) -> bool {
        let inside = Some(post.subreddit) == self.target;
        match scope {
            Scope::All => true,
            Scope::Inside => inside,
            Scope::Outside => !inside,
            Scope::Banned => self.banned.as_ref().is_some_and(|b| b[post.subreddit as usize]),
            Scope::NonBanned => self.banned.as_ref().is_some_and(|b| !b[post.subreddit as usize]),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TokenTally {
    pub tokens: u64,
    pub hate: u64,
}

impl TokenTally {
    pub fn ratio(&self) -> Option<f64> {
        (self.tokens > 0).then(|| self.hate as f64 / self.tokens as f64)
    }
}

/// Token tallies for one user-day, one slot per [`Scope`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DayTally([TokenTally; 5]);

impl DayTally {
    pub fn get(&self, scope: Scope) -> TokenTally {
        self.0[scope.index()]
    }
}

/// Counts tokens and lexicon hits of one post body.
pub fn count_tokens(body: &str, lexicon: &HateLexicon, stopwords: &Stopwords) -> TokenTally {
    let mut t = TokenTally::default();
    for tok in tokens(body, stopwords) {
        t.tokens += 1;
        if lexicon.contains(&tok) {
            t.hate += 1;
        }
    }
    t
}

/// Per-day tallies over every scope for the given posts.
pub fn day_tallies<'a, I>(posts: I, lexicon: &HateLexicon, stopwords: &Stopwords, ctx: &ScopeContext) -> BTreeMap<Day, DayTally>
where
    I: IntoIterator<Item = &'a Post>,
{
    let mut days: BTreeMap<Day, DayTally> = BTreeMap::new();
    for post in posts {
        let t = count_tokens(&post.body, lexicon, stopwords);
        let entry = days.entry(post.day()).or_default();
        for scope in Scope::ALL {
            if ctx.covers(post, scope) {
                let slot = &mut entry.0[scope.index()];
                slot.tokens += t.tokens;
                slot.hate += t.hate;
            }
        }
    }
    days
}

/// Fraction of tokens that are lexicon words; `None` for an empty list.
pub fn hate_ratio<S: AsRef<str>>(tokens: &[S], lexicon: &HateLexicon) -> Option<f64> {
    if tokens.is_empty() {
        return None;
    }
    let hits = tokens.iter().filter(|t| lexicon.contains(t.as_ref())).count();
    Some(hits as f64 / tokens.len() as f64)
}

/// One user-day measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyPoint {
    pub user: String,
    pub day: Day,
    pub relative_day: i64,
    pub hate_ratio: f64,
    pub tokens: u64,
    pub hate_tokens: u64,
    pub scope: Scope,
}

/// Points from precomputed tallies for the days that have tokens in scope.
pub fn points_from_tallies(user: &str, tallies: &BTreeMap<Day, DayTally>, scope: Scope, day0: Day) -> Vec<DailyPoint> {
    tallies
        .iter()
        .filter_map(|(&day, tally)| {
            let t = tally.get(scope);
            t.ratio().map(|ratio| DailyPoint {
                user: user.to_string(),
                day,
                relative_day: day - day0,
                hate_ratio: ratio,
                tokens: t.tokens,
                hate_tokens: t.hate,
                scope,
            })
        })
        .collect()
}

/// Daily hate ratios of `user` within `scope`, relative to `day0`.
pub fn daily_series(
    corpus: &Corpus,
    user: &str,
    lexicon: &HateLexicon,
    stopwords: &Stopwords,
    ctx: &ScopeContext,
    scope: Scope,
    day0: Day,
) -> Result<Vec<DailyPoint>> {
    if matches!(scope, Scope::Banned | Scope::NonBanned) && !ctx.has_banned_list() {
        return Err(Error::InvalidInput(format!("scope `{scope}` needs a banned-subreddit list")));
    }
    let tallies = day_tallies(corpus.posts_by_author(user), lexicon, stopwords, ctx);
    Ok(points_from_tallies(user, &tallies, scope, day0))
}
