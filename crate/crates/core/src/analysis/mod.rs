//! Context-scoped series, lifespan split and hate-word distributions.

mod spearman;

pub use spearman::{average_ranks, spearman, RankCorrelation};

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::calendar::Day;
use crate::cohort::MatchedPair;
use crate::corpus::{tokens, Corpus, Stopwords};
use crate::error::{Error, Result};
use crate::fsutil::{write_atomic, write_json};
use crate::its::group_daily_means;
use crate::lexicon::{day_tallies, points_from_tallies, DailyPoint, DayTally, HateLexicon, Scope, ScopeContext};

pub const DEFAULT_LIFESPAN_DAYS: i64 = 365;

/// Per-day tallies of one cohort member.
#[derive(Debug, Clone)]
pub struct UserTallies {
    pub user: String,
    pub day0: Day,
    pub days: BTreeMap<Day, DayTally>,
}

impl UserTallies {
    pub fn points(&self, scope: Scope) -> Vec<DailyPoint> {
        points_from_tallies(&self.user, &self.days, scope, self.day0)
    }
}

/// Tallies for every `(user, day0)`, in input order.
pub fn cohort_tallies(
    corpus: &Corpus,
    users: &[(String, Day)],
    lexicon: &HateLexicon,
    stopwords: &Stopwords,
    ctx: &ScopeContext,
) -> Vec<UserTallies> {
    users
        .par_iter()
        .map(|(user, day0)| UserTallies {
            user: user.clone(),
            day0: *day0,
            days: day_tallies(corpus.posts_by_author(user), lexicon, stopwords, ctx),
        })
        .collect()
}

/// Flattened points of a cohort in one scope, ordered by (user, day).
pub fn cohort_points(cohort: &[UserTallies], scope: Scope) -> Vec<DailyPoint> {
    let mut pts: Vec<DailyPoint> = cohort.par_iter().flat_map_iter(|u| u.points(scope)).collect();
    pts.sort_by(|a, b| a.user.cmp(&b.user).then(a.day.cmp(&b.day)));
    pts
}

pub fn treatments_of(pairs: &[MatchedPair]) -> Vec<(String, Day)> {
    pairs.iter().map(|p| (p.treatment.clone(), p.day0)).collect()
}

pub fn controls_of(pairs: &[MatchedPair]) -> Vec<(String, Day)> {
    pairs.iter().map(|p| (p.control.clone(), p.day0)).collect()
}

/// Daily group means `(mean hate ratio, users)` keyed by relative day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextSeries {
    pub label: String,
    pub days: BTreeMap<i64, (f64, usize)>,
}

/// One series per scope over the treatments, plus the controls in scope
/// `all`. Banned scopes are skipped when no banned list was loaded.
pub fn context_series(treatments: &[UserTallies], controls: &[UserTallies], ctx: &ScopeContext) -> Vec<ContextSeries> {
    let mut scopes: Vec<Scope> = vec![Scope::All, Scope::Inside, Scope::Outside];
    if ctx.has_banned_list() {
        scopes.extend([Scope::Banned, Scope::NonBanned]);
    } else {
        log::warn!("no banned-subreddit list loaded; skipping banned and non-banned series");
    }
    let mut out: Vec<ContextSeries> = scopes
        .par_iter()
        .map(|&s| ContextSeries {
            label: s.as_str().to_string(),
            days: group_daily_means(&cohort_points(treatments, s)),
        })
        .collect();
    out.push(ContextSeries {
        label: "control".into(),
        days: group_daily_means(&cohort_points(controls, Scope::All)),
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifespanGroup {
    pub users: usize,
    pub user_days: usize,
    /// Mean post-join hate ratio over user-days; absent without user-days.
    pub mean_hate_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifespanSplit {
    pub threshold_days: i64,
    pub scope: Scope,
    pub short: Option<LifespanGroup>,
    pub long: Option<LifespanGroup>,
}

/// Splits treatments by the gap between day 0 and their last post anywhere.
pub fn lifespan_split(corpus: &Corpus, treatments: &[UserTallies], scope: Scope, threshold_days: i64) -> LifespanSplit {
    let mut groups: [(usize, usize, f64); 2] = [(0, 0, 0.0); 2];
    for u in treatments {
        let last = corpus.posts_by_author(&u.user).last().map_or(u.day0, |p| p.day());
        let g = &mut groups[usize::from(last - u.day0 > threshold_days)];
        g.0 += 1;
        for p in u.points(scope).iter().filter(|p| p.relative_day >= 0) {
            g.1 += 1;
            g.2 += p.hate_ratio;
        }
    }
    let summary = |(users, user_days, sum): (usize, usize, f64)| {
        (users > 0).then(|| LifespanGroup {
            users,
            user_days,
            mean_hate_ratio: (user_days > 0).then(|| sum / user_days as f64),
        })
    };
    LifespanSplit {
        threshold_days,
        scope,
        short: summary(groups[0]),
        long: summary(groups[1]),
    }
}

/// Lexicon-word counts and relative frequencies within one scope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordDistribution {
    pub scope: Scope,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl WordDistribution {
    /// Relative frequency of every lexicon word (zero when unseen).
    pub fn frequencies(&self) -> BTreeMap<String, f64> {
        self.counts
            .iter()
            .map(|(w, &c)| (w.clone(), c as f64 / self.total as f64))
            .collect()
    }
}

/// Lexicon-word usage by treatments on and after their day 0.
pub fn word_distribution(
    corpus: &Corpus,
    treatments: &[(String, Day)],
    lexicon: &HateLexicon,
    stopwords: &Stopwords,
    ctx: &ScopeContext,
    scope: Scope,
) -> Result<WordDistribution> {
    if matches!(scope, Scope::Banned | Scope::NonBanned) && !ctx.has_banned_list() {
        return Err(Error::InvalidInput(format!("scope `{scope}` needs a banned-subreddit list")));
    }
    let partial: Vec<BTreeMap<String, u64>> = treatments
        .par_iter()
        .map(|(user, day0)| {
            let mut m = BTreeMap::new();
            for post in corpus.posts_by_author(user) {
                if post.day() < *day0 || !ctx.covers(post, scope) {
                    continue;
                }
                for t in tokens(&post.body, stopwords) {
                    if lexicon.contains(&t) {
                        *m.entry(t.into_owned()).or_insert(0) += 1;
                    }
                }
            }
            m
        })
        .collect();
    let mut counts: BTreeMap<String, u64> = lexicon.entries().iter().map(|e| (e.word.clone(), 0)).collect();
    for m in partial {
        for (w, c) in m {
            *counts.entry(w).or_insert(0) += c;
        }
    }
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::NoLexiconHits(scope.as_str().to_string()));
    }
    Ok(WordDistribution { scope, counts, total })
}

/// Spearman correlation of two distributions aligned on their shared words.
pub fn compare_distributions(a: &WordDistribution, b: &WordDistribution) -> Result<RankCorrelation> {
    let fa = a.frequencies();
    let fb = b.frequencies();
    let (x, y): (Vec<f64>, Vec<f64>) = fa
        .iter()
        .filter_map(|(w, &v)| fb.get(w).map(|&u| (v, u)))
        .unzip();
    spearman(&x, &y)
}

/// Spearman output with the caveat that travels with it.
#[derive(Debug, Clone, Serialize)]
pub struct SpearmanReport {
    pub first: Scope,
    pub second: Scope,
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub note: &'static str,
}

pub const SPEARMAN_NOTE: &str = "A small p-value indicates a significant monotonic association \
between the two word-frequency rankings. It is not evidence that the distributions differ; \
read rho for the strength and direction of agreement.";

impl SpearmanReport {
    pub fn new(first: Scope, second: Scope, r: RankCorrelation) -> Self {
        SpearmanReport {
            first,
            second,
            rho: r.rho,
            p_value: r.p_value,
            n: r.n,
            note: SPEARMAN_NOTE,
        }
    }
}

pub fn write_context_csv(path: &Path, series: &[ContextSeries]) -> Result<()> {
    let mut out = String::from("scope,day,mean,n\n");
    for s in series {
        for (day, (mean, n)) in &s.days {
            out.push_str(&format!("{},{day},{mean},{n}\n", s.label));
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_lifespan_csv(path: &Path, split: &LifespanSplit) -> Result<()> {
    let mut out = String::from("group,threshold_days,scope,users,user_days,mean_hate_ratio\n");
    for (name, g) in [("short", &split.short), ("long", &split.long)] {
        let row = match g {
            Some(g) => format!(
                "{},{},{}",
                g.users,
                g.user_days,
                g.mean_hate_ratio.map_or_else(|| "absent".to_string(), |m| m.to_string())
            ),
            None => "0,0,absent".to_string(),
        };
        out.push_str(&format!("{name},{},{},{row}\n", split.threshold_days, split.scope));
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_word_freq_csv(path: &Path, dists: &[WordDistribution]) -> Result<()> {
    let mut out = String::from("scope,word,count,freq\n");
    for d in dists {
        for (w, f) in d.frequencies() {
            out.push_str(&format!("{},{w},{},{f}\n", d.scope, d.counts[&w]));
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_spearman_json(path: &Path, report: &SpearmanReport) -> Result<()> {
    write_json(path, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PostKind, PostRecord};

    fn rec(author: &str, sub: &str, day: i64, body: &str) -> PostRecord {
        PostRecord {
            id: format!("{author}{sub}{day}{body}"),
            author: author.into(),
            subreddit: sub.into(),
            created_utc: day * 86_400 + 60,
            body: body.into(),
            kind: PostKind::Comment,
            score: 0,
            author_created_utc: None,
        }
    }

    fn setup() -> (Corpus, HateLexicon, Vec<(String, Day)>) {
        let c = Corpus::from_records(
            vec![
                rec("a", "target", 10, "slur ok ok ok"),
                rec("a", "other", 10, "slur slur ok ok"),
                rec("a", "other", 9, "slur ok"),
                rec("a", "other", 500, "fine words"),
                rec("b", "target", 12, "jerk ok"),
            ],
            5,
            0,
        );
        let lex = HateLexicon::from_words("target", ["slur", "jerk"]);
        (c, lex, vec![("a".into(), 10), ("b".into(), 12)])
    }

    #[test]
    fn scope_counts_partition() {
        let (c, lex, users) = setup();
        let ctx = ScopeContext::new(&c, "target", None);
        let sw = Stopwords::empty();
        let all = word_distribution(&c, &users, &lex, &sw, &ctx, Scope::All).unwrap();
        let inside = word_distribution(&c, &users, &lex, &sw, &ctx, Scope::Inside).unwrap();
        let outside = word_distribution(&c, &users, &lex, &sw, &ctx, Scope::Outside).unwrap();
        for w in ["slur", "jerk"] {
            assert_eq!(all.counts[w], inside.counts[w] + outside.counts[w]);
        }
        // day 9 precedes day 0 and is ignored
        assert_eq!(all.counts["slur"], 3);
        let sum: f64 = all.frequencies().values().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(word_distribution(&c, &users, &lex, &sw, &ctx, Scope::Banned).is_err());
    }

    #[test]
    fn lifespan_groups_partition() {
        let (c, lex, users) = setup();
        let ctx = ScopeContext::new(&c, "target", None);
        let tallies = cohort_tallies(&c, &users, &lex, &Stopwords::empty(), &ctx);
        let split = lifespan_split(&c, &tallies, Scope::All, 365);
        let short = split.short.unwrap();
        let long = split.long.unwrap();
        assert_eq!(short.users + long.users, 2);
        assert_eq!(short.users, 1);
        assert_eq!(short.mean_hate_ratio, Some(0.5));
        let none_short = lifespan_split(&c, &tallies[..1], Scope::All, 365);
        assert!(none_short.short.is_none());
    }

    #[test]
    fn series_without_banned_list() {
        let (c, lex, users) = setup();
        let ctx = ScopeContext::new(&c, "target", None);
        let t = cohort_tallies(&c, &users, &lex, &Stopwords::empty(), &ctx);
        let s = context_series(&t, &t, &ctx);
        let labels: Vec<&str> = s.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["all", "inside", "outside", "control"]);
        let banned: std::collections::BTreeSet<String> = ["target", "other"].iter().map(|s| s.to_string()).collect();
        let ctx = ScopeContext::new(&c, "target", Some(&banned));
        let t = cohort_tallies(&c, &users, &lex, &Stopwords::empty(), &ctx);
        let s = context_series(&t, &t, &ctx);
        assert!(s.iter().find(|s| s.label == "non-banned").unwrap().days.is_empty());
    }
}
