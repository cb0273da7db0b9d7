//! Treatment/control cohort construction and Mahalanobis 1:1 matching.

mod features;
mod mahalanobis;

pub use features::{features_at, FeatureSpace, FeatureVector, DEFAULT_FEATURE_SUBREDDITS};
pub use mahalanobis::{mahalanobis_distance, CovarianceEstimate, RIDGE_FRACTION};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::calendar::{iso_date, parse_iso_date, Day, Month};
use crate::corpus::{Corpus, PLACEHOLDER_AUTHORS};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const DEFAULT_CONTROL_SUBREDDITS: usize = 30;
pub const DEFAULT_CAP_RATIO: usize = 5;
pub const DEFAULT_TREATMENT_CAP: usize = 15_000;

/// Share of a subreddit's authors who are treatment users.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubredditScore {
    pub name: String,
    pub score: f64,
    pub authors: usize,
    pub treatment_authors: usize,
}

/// Ranks every subreddit except `target` by treatment-author share; ties go
/// to the larger subreddit, then to the name.
pub fn rank_subreddits(corpus: &Corpus, treatment: &BTreeSet<String>, target: &str) -> Vec<SubredditScore> {
    let treated: Vec<bool> = corpus
        .authors()
        .iter()
        .map(|a| treatment.contains(a))
        .collect();
    let placeholder: Vec<bool> = corpus
        .authors()
        .iter()
        .map(|a| PLACEHOLDER_AUTHORS.contains(&a.as_str()))
        .collect();
    let mut scores: Vec<SubredditScore> = (0..corpus.subreddits().len() as u32)
        .into_par_iter()
        .filter(|&sid| corpus.subreddit_name(sid) != target)
        .filter_map(|sid| {
            let authors: Vec<u32> = corpus
                .author_ids_in(sid)
                .into_iter()
                .filter(|&a| !placeholder[a as usize])
                .collect();
            if authors.is_empty() {
                return None;
            }
            let hits = authors.iter().filter(|&&a| treated[a as usize]).count();
            Some(SubredditScore {
                name: corpus.subreddit_name(sid).to_string(),
                score: hits as f64 / authors.len() as f64,
                authors: authors.len(),
                treatment_authors: hits,
            })
        })
        .collect();
    scores.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.authors.cmp(&a.authors))
            .then_with(|| a.name.cmp(&b.name))
    });
    scores
}

/// Top `k` of [`rank_subreddits`].
pub fn rank_control_subreddits(corpus: &Corpus, treatment: &BTreeSet<String>, target: &str, k: usize) -> Result<Vec<SubredditScore>> {
    if treatment.is_empty() {
        return Err(Error::InvalidInput("treatment user set is empty".into()));
    }
    let mut r = rank_subreddits(corpus, treatment, target);
    r.truncate(k);
    Ok(r)
}

fn seeded_sample(mut items: Vec<String>, k: usize, seed: u64) -> Vec<String> {
    items.sort();
    items.dedup();
    if items.len() > k {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        items = rand::seq::index::sample(&mut rng, items.len(), k)
            .into_iter()
            .map(|i| items[i].clone())
            .collect();
        items.sort();
    }
    items
}

/// Uniform seeded subsample of at most `cap` treatment users, sorted.
pub fn sample_treatments(members: &BTreeSet<String>, cap: usize, seed: u64) -> Vec<String> {
    seeded_sample(members.iter().cloned().collect(), cap, seed)
}

/// Authors of the control subreddits who are neither target members nor
/// bots, subsampled to `cap_ratio * n_treatments`.
pub fn build_control_pool(
    corpus: &Corpus,
    control_subreddits: &[String],
    target_members: &BTreeSet<String>,
    bots: &BTreeSet<String>,
    cap_ratio: usize,
    n_treatments: usize,
    seed: u64,
) -> Result<Vec<String>> {
    if control_subreddits.is_empty() {
        return Err(Error::InvalidInput("no control subreddits".into()));
    }
    let mut candidates = BTreeSet::new();
    for s in control_subreddits {
        let Some(sid) = corpus.subreddit_id(s) else { continue };
        for a in corpus.author_ids_in(sid) {
            let name = corpus.author_name(a);
            if !PLACEHOLDER_AUTHORS.contains(&name) && !target_members.contains(name) && !bots.contains(name) {
                candidates.insert(name.to_string());
            }
        }
    }
    if candidates.len() < n_treatments {
        return Err(Error::PoolTooSmall {
            pool: candidates.len(),
            treatments: n_treatments,
        });
    }
    Ok(seeded_sample(
        candidates.into_iter().collect(),
        cap_ratio.saturating_mul(n_treatments),
        seed ^ 0x9e37_79b9_7f4a_7c15,
    ))
}

/// Day of each user's first post in `target` (users without one are skipped).
pub fn activation_days<'a, I>(corpus: &Corpus, target: &str, users: I) -> BTreeMap<String, Day>
where
    I: IntoIterator<Item = &'a String>,
{
    let Some(sid) = corpus.subreddit_id(target) else {
        return BTreeMap::new();
    };
    users
        .into_iter()
        .filter_map(|u| {
            corpus
                .posts_by_author(u)
                .iter()
                .find(|p| p.subreddit == sid)
                .map(|p| (u.clone(), p.day()))
        })
        .collect()
}

/// A treatment user, its matched control, their distance and shared day 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedPair {
    pub treatment: String,
    pub control: String,
    pub distance: f64,
    pub day0: Day,
}

/// Features of one matched user at its pair's snapshot month.
#[derive(Debug, Clone, Serialize)]
pub struct FeatureAudit {
    pub user: String,
    pub role: &'static str,
    pub month: Month,
    pub features: FeatureVector,
}

#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub pairs: Vec<MatchedPair>,
    pub audit: Vec<FeatureAudit>,
}

struct MonthSnapshot {
    cov: CovarianceEstimate,
    whitened: Vec<Vec<f64>>,
    features: Vec<FeatureVector>,
}

fn snapshot(corpus: &Corpus, pool: &[String], month: Month, space: &FeatureSpace) -> Result<MonthSnapshot> {
    let cutoff = month.first_day();
    let features: Vec<FeatureVector> = pool
        .par_iter()
        .map(|u| features_at(corpus, u, cutoff, space))
        .collect();
    let rows: Vec<Vec<f64>> = features.iter().map(FeatureVector::to_vec).collect();
    let cov = CovarianceEstimate::estimate(&rows)?;
    let whitened = rows.par_iter().map(|r| cov.whiten(r)).collect();
    Ok(MonthSnapshot { cov, whitened, features })
}

/// Greedy 1:1 nearest-neighbour matching without replacement.
///
/// Treatments are visited in a seeded random order. Each is compared with
/// the remaining candidates on features from before its activation month,
/// under the covariance of the whole pool at that month. Controls inherit
/// their partner's day 0.
pub fn match_pairs(
    corpus: &Corpus,
    treatments: &BTreeMap<String, Day>,
    pool: &[String],
    space: &FeatureSpace,
    seed: u64,
) -> Result<MatchOutcome> {
    let mut pool: Vec<String> = pool.to_vec();
    pool.sort();
    pool.dedup();
    if let Some(t) = pool.iter().find(|c| treatments.contains_key(*c)) {
        return Err(Error::InvalidInput(format!("pool candidate `{t}` is a treatment user")));
    }

    let mut order: Vec<(&String, &Day)> = treatments.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut snapshots: HashMap<Month, MonthSnapshot> = HashMap::new();
    let mut used = vec![false; pool.len()];
    let mut pairs = Vec::with_capacity(order.len());
    let mut audit = Vec::with_capacity(2 * order.len());

    for (matched, (user, &day0)) in order.into_iter().enumerate() {
        let month = Month::containing(day0);
        if !snapshots.contains_key(&month) {
            snapshots.insert(month, snapshot(corpus, &pool, month, space)?);
        }
        let snap = &snapshots[&month];
        let tf = features_at(corpus, user, month.first_day(), space);
        let tz = snap.cov.whiten(&tf.to_vec());
        let best = snap
            .whitened
            .par_iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, z)| {
                let d2: f64 = z.iter().zip(&tz).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((d2, idx)) = best else {
            return Err(Error::PoolExhausted {
                matched,
                treatments: treatments.len(),
            });
        };
        used[idx] = true;
        pairs.push(MatchedPair {
            treatment: user.clone(),
            control: pool[idx].clone(),
            distance: d2.sqrt(),
            day0,
        });
        audit.push(FeatureAudit {
            user: user.clone(),
            role: "treatment",
            month,
            features: tf,
        });
        audit.push(FeatureAudit {
            user: pool[idx].clone(),
            role: "control",
            month,
            features: snap.features[idx].clone(),
        });
    }
    Ok(MatchOutcome { pairs, audit })
}

/// `treatment⇥control⇥distance⇥day0` with a header row.
pub fn write_pairs(path: &Path, pairs: &[MatchedPair]) -> Result<()> {
    let mut out = String::from("treatment\tcontrol\tdistance\tday0\n");
    for p in pairs {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", p.treatment, p.control, p.distance, iso_date(p.day0)));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_pairs(path: &Path) -> Result<Vec<MatchedPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with("treatment\t") || line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: m.to_string(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad("expected treatment, control, distance, day0"));
        }
        pairs.push(MatchedPair {
            treatment: cols[0].to_string(),
            control: cols[1].to_string(),
            distance: cols[2].parse().map_err(|_| bad("bad distance"))?,
            day0: parse_iso_date(cols[3]).ok_or_else(|| bad("bad ISO-8601 date"))?,
        });
    }
    Ok(pairs)
}

/// Feature snapshot audit as CSV.
pub fn write_feature_audit(path: &Path, audit: &[FeatureAudit], space: &FeatureSpace) -> Result<()> {
    let mut out = format!("user,role,month,{}\n", space.labels().join(","));
    for a in audit {
        let values: Vec<String> = a.features.to_vec().iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{},{},{},{}\n", a.user, a.role, a.month, values.join(",")));
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PostKind, PostRecord};

    fn rec(author: &str, sub: &str, day: i64, n: usize) -> PostRecord {
        PostRecord {
            id: format!("{author}-{sub}-{day}-{n}"),
            author: author.into(),
            subreddit: sub.into(),
            created_utc: day * 86_400 + n as i64,
            body: "x".into(),
            kind: PostKind::Comment,
            score: 1,
            author_created_utc: None,
        }
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn pure_treatment_subreddit_ranks_first() {
        let recs = vec![
            rec("t1", "all_t", 1, 0),
            rec("t2", "all_t", 1, 0),
            rec("t1", "mixed", 1, 0),
            rec("c1", "mixed", 1, 0),
            rec("t1", "target", 1, 0),
        ];
        let c = Corpus::from_records(recs, 5, 0);
        let r = rank_control_subreddits(&c, &set(&["t1", "t2"]), "target", 30).unwrap();
        assert_eq!(r[0].name, "all_t");
        assert_eq!(r[0].score, 1.0);
        assert_eq!(r.len(), 2);
        assert!(rank_control_subreddits(&c, &BTreeSet::new(), "target", 30).is_err());
    }

    #[test]
    fn pool_excludes_members_and_is_seeded() {
        let mut recs = vec![rec("t1", "ctl", 1, 0)];
        for i in 0..40 {
            recs.push(rec(&format!("c{i:02}"), "ctl", 1, 0));
        }
        let c = Corpus::from_records(recs, 41, 0);
        let members = set(&["t1"]);
        let pool = build_control_pool(&c, &["ctl".to_string()], &members, &BTreeSet::new(), 5, 4, 7).unwrap();
        assert_eq!(pool.len(), 20);
        assert!(!pool.contains(&"t1".to_string()));
        let again = build_control_pool(&c, &["ctl".to_string()], &members, &BTreeSet::new(), 5, 4, 7).unwrap();
        assert_eq!(pool, again);
        assert!(matches!(
            build_control_pool(&c, &["ctl".to_string()], &members, &BTreeSet::new(), 5, 100, 7),
            Err(Error::PoolTooSmall { .. })
        ));
    }

    #[test]
    fn exact_clone_is_selected() {
        let mut recs = Vec::new();
        // treatment "t" active on day 100 (1970-04-11); history in "a" and "b"
        for (i, d) in [10, 20, 30].iter().enumerate() {
            recs.push(rec("t", "a", *d, i));
            recs.push(rec("clone", "a", *d, i));
        }
        recs.push(rec("t", "target", 100, 0));
        for i in 0..6 {
            recs.push(rec(&format!("other{i}"), "a", 5 + i as i64 * 7, 0));
            recs.push(rec(&format!("other{i}"), "b", 6 + i as i64 * 3, 0));
        }
        let c = Corpus::from_records(recs, 0, 0);
        let space = FeatureSpace::new(&c, &["a".to_string(), "b".to_string()]);
        let treatments = activation_days(&c, "target", &["t".to_string()]);
        assert_eq!(treatments["t"], 100);
        let pool: Vec<String> = std::iter::once("clone".to_string())
            .chain((0..6).map(|i| format!("other{i}")))
            .collect();
        let out = match_pairs(&c, &treatments, &pool, &space, 1).unwrap();
        assert_eq!(out.pairs[0].control, "clone");
        assert_eq!(out.pairs[0].distance, 0.0);
        assert_eq!(out.pairs[0].day0, 100);
    }

    #[test]
    fn exhausted_pool_reports_progress() {
        let recs = vec![
            rec("t1", "target", 50, 0),
            rec("t2", "target", 50, 0),
            rec("c1", "a", 10, 0),
            rec("c2", "a", 12, 0),
            rec("c2", "a", 13, 1),
        ];
        let c = Corpus::from_records(recs, 0, 0);
        let space = FeatureSpace::new(&c, &["a".to_string()]);
        let t = activation_days(&c, "target", &["t1".to_string(), "t2".to_string()]);
        let pool = vec!["c1".to_string(), "c2".to_string()];
        assert_eq!(match_pairs(&c, &t, &pool, &space, 3).unwrap().pairs.len(), 2);
        let err = match_pairs(&c, &t, &pool[..1], &space, 3);
        assert!(err.is_err());
    }

    #[test]
    fn pairs_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        let pairs = vec![MatchedPair {
            treatment: "a".into(),
            control: "b".into(),
            distance: 1.5,
            day0: 16_800,
        }];
        write_pairs(&p, &pairs).unwrap();
        assert_eq!(read_pairs(&p).unwrap(), pairs);
    }
}
