//! Turns a [`CohortPlan`] into post records, dump files and ground truth.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use super::{plan_cohort, stream_rng, zipf_weights, CohortPlan, HateMode, Role, SynthSpec};
use crate::calendar::{iso_date, timestamp_of_day, Day};
use crate::corpus::{PostKind, PostRecord};
use crate::error::{Error, Result};
use crate::fsutil::{write_atomic, write_json, AtomicWriter};
use crate::its::Coefficients;
use crate::lexicon::Scope;

const FILLER: [&str; 4] = ["the", "and", "of", "to"];

/// Exact per-scope tallies of one user-day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TruthDay {
    pub user_index: usize,
    pub day: Day,
    pub relative_day: i64,
    pub scope: Scope,
    pub tokens: u64,
    pub hate: u64,
}

struct Words {
    general: Vec<String>,
    hate: Vec<String>,
    jargon: Vec<String>,
    zipf: WeightedAliasIndex<f64>,
    inside_profile: WeightedAliasIndex<f64>,
    outside_profile: WeightedAliasIndex<f64>,
}

impl Words {
    fn new(spec: &SynthSpec) -> Self {
        let n = spec.hate_words;
        // inside favours the first hate words, outside the last ones
        let ramp = |i: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let inside: Vec<f64> = (0..n).map(|i| 2.0 - ramp(i)).collect();
        let outside: Vec<f64> = (0..n).map(|i| 1.0 + ramp(i)).collect();
        Words {
            general: spec.general_words(),
            hate: spec.hate_word_list(),
            jargon: spec.jargon_word_list(),
            zipf: WeightedAliasIndex::new(zipf_weights(spec.vocab, spec.zipf_exponent)).expect("positive weights"),
            inside_profile: WeightedAliasIndex::new(inside).expect("positive weights"),
            outside_profile: WeightedAliasIndex::new(outside).expect("positive weights"),
        }
    }

    fn general(&self, rng: &mut ChaCha8Rng) -> &str {
        &self.general[self.zipf.sample(rng)]
    }
}

fn compose(rng: &mut ChaCha8Rng, mut words: Vec<&str>) -> String {
    words.shuffle(rng);
    let mut body = String::with_capacity(words.len() * 7);
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            body.push(' ');
            if rng.random_bool(0.05) {
                body.push_str(FILLER[rng.random_range(0..FILLER.len())]);
                body.push(' ');
            }
        }
        if i == 0 {
            let mut c = w.chars();
            if let Some(f) = c.next() {
                body.extend(f.to_uppercase());
                body.push_str(c.as_str());
            }
        } else {
            body.push_str(w);
        }
    }
    if !body.is_empty() {
        body.push('.');
    }
    body
}

struct Rendered {
    records: Vec<PostRecord>,
    truth: Vec<TruthDay>,
    words: [BTreeMap<String, u64>; 3],
}

fn render_user(plan: &CohortPlan, words: &Words, index: usize) -> Rendered {
    let spec = &plan.spec;
    let user = &plan.users[index];
    let names = spec.subreddit_names();
    let mut rng = stream_rng(spec.seed, (index as u64) | (1 << 42));
    let mut records = Vec::new();
    let mut truth = Vec::new();
    let mut word_counts: [BTreeMap<String, u64>; 3] = Default::default();
    let created = timestamp_of_day(user.created_day) + 43_200;
    for d in &user.days {
        let mut tally = [(0u64, 0u64); 5];
        for (k, p) in d.posts.iter().enumerate() {
            let inside = p.subreddit == 0;
            let banned = p.subreddit <= spec.banned_subreddits;
            let profile = if inside { &words.inside_profile } else { &words.outside_profile };
            let mut toks: Vec<&str> = Vec::with_capacity(p.tokens as usize);
            for _ in 0..p.hate {
                let w = &words.hate[profile.sample(&mut rng)];
                if user.exposed() && d.t >= 0 {
                    for slot in [0, if inside { 1 } else { 2 }] {
                        *word_counts[slot].entry(w.clone()).or_insert(0) += 1;
                    }
                }
                toks.push(w);
            }
            for _ in p.hate..p.tokens {
                if inside && !words.jargon.is_empty() && rng.random_bool(spec.jargon_rate) {
                    toks.push(&words.jargon[rng.random_range(0..words.jargon.len())]);
                } else {
                    toks.push(words.general(&mut rng));
                }
            }
            for (slot, on) in [(0, true), (1, inside), (2, !inside), (3, banned), (4, !banned)] {
                if on {
                    tally[slot].0 += p.tokens;
                    tally[slot].1 += p.hate;
                }
            }
            records.push(PostRecord {
                id: format!("{}_{}_{k}", user.name, d.day),
                author: user.name.clone(),
                subreddit: names[p.subreddit].clone(),
                created_utc: timestamp_of_day(d.day) + 3_600 * k as i64 + rng.random_range(0..3_600),
                body: compose(&mut rng, toks),
                kind: p.kind,
                score: p.score,
                author_created_utc: Some(created),
            });
        }
        if user.role == Role::Bot {
            continue;
        }
        for (scope, (tokens, hate)) in Scope::ALL.into_iter().zip(tally) {
            if tokens > 0 {
                truth.push(TruthDay {
                    user_index: index,
                    day: d.day,
                    relative_day: d.t,
                    scope,
                    tokens,
                    hate,
                });
            }
        }
    }
    Rendered {
        records,
        truth,
        words: word_counts,
    }
}

/// Rendered posts of every user plus the exact user-day truth and the
/// post-join hate-word counts of treatments in scopes all, inside, outside.
pub fn render_records(plan: &CohortPlan) -> (Vec<PostRecord>, Vec<TruthDay>, [BTreeMap<String, u64>; 3]) {
    let words = Words::new(&plan.spec);
    let parts: Vec<Rendered> = (0..plan.users.len())
        .into_par_iter()
        .map(|i| render_user(plan, &words, i))
        .collect();
    let mut records = Vec::new();
    let mut truth = Vec::new();
    let mut counts: [BTreeMap<String, u64>; 3] = Default::default();
    for r in parts {
        records.extend(r.records);
        truth.extend(r.truth);
        for (acc, m) in counts.iter_mut().zip(r.words) {
            for (w, c) in m {
                *acc.entry(w).or_insert(0) += c;
            }
        }
    }
    (records, truth, counts)
}

fn background_records(spec: &SynthSpec) -> Vec<PostRecord> {
    let words = Words::new(spec);
    let mut rng = stream_rng(spec.seed, 1 << 43);
    let users = spec.background_users.max(1);
    let start = crate::calendar::parse_iso_date(&spec.start_date).expect("validated");
    let mut out = Vec::new();
    let mut emitted = 0u64;
    let mut k = 0usize;
    while emitted < spec.background_tokens {
        let n = rng.random_range(spec.tokens_min..=spec.tokens_max);
        let mut toks: Vec<&str> = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let u: f64 = rng.random();
            if u < spec.background_hate_rate {
                toks.push(&words.hate[rng.random_range(0..words.hate.len())]);
            } else if u < spec.background_hate_rate + spec.background_jargon_rate && !words.jargon.is_empty() {
                toks.push(&words.jargon[rng.random_range(0..words.jargon.len())]);
            } else {
                toks.push(words.general(&mut rng));
            }
        }
        let day = start + (k % 700) as i64;
        out.push(PostRecord {
            id: format!("bg{k:07}"),
            author: format!("bg{:04}", k % users),
            subreddit: format!("general{:02}", k % 10),
            created_utc: timestamp_of_day(day) + rng.random_range(0..86_400),
            body: compose(&mut rng, toks),
            kind: PostKind::Comment,
            score: rng.random_range(-2..=25),
            author_created_utc: None,
        });
        emitted += n;
        k += 1;
    }
    out
}

fn write_ndjson(path: &Path, records: &[PostRecord]) -> Result<()> {
    let mut w = AtomicWriter::create(path)?;
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.commit()
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestUser {
    pub name: String,
    #[serde(flatten)]
    pub role: Role,
    pub partner_name: Option<String>,
    pub day0: String,
    pub created: String,
    pub short_lived: bool,
}

/// Ground truth of a generated cohort.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub target: String,
    pub mode: HateMode,
    pub beta: Coefficients,
    pub planted_relative_increase_pct: Option<f64>,
    pub inside_share: f64,
    pub inside_rate: f64,
    pub hate_words: Vec<String>,
    pub jargon_words: Vec<String>,
    pub banned: Vec<String>,
    pub users: Vec<ManifestUser>,
    /// Post-join hate-word counts of treatments per scope.
    pub word_counts: BTreeMap<String, BTreeMap<String, u64>>,
    pub records: usize,
    pub background_records: usize,
}

/// Paths written by [`generate_cohort`].
#[derive(Debug, Clone)]
pub struct CohortArtifacts {
    pub dump: PathBuf,
    pub background: PathBuf,
    pub ratings: PathBuf,
    pub banned: PathBuf,
    pub manifest: PathBuf,
    pub truth: PathBuf,
}

impl CohortArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        CohortArtifacts {
            dump: dir.join("posts.ndjson"),
            background: dir.join("background.ndjson"),
            ratings: dir.join("ratings.tsv"),
            banned: dir.join("banned.txt"),
            manifest: dir.join("manifest.json"),
            truth: dir.join("truth_days.tsv"),
        }
    }
}

fn ratings_tsv(spec: &SynthSpec) -> String {
    let mut out = String::from("word\tr1\tr2\tr3\n");
    for (i, w) in spec.hate_word_list().iter().enumerate() {
        let r = if i % 2 == 0 { "2\t2\t1" } else { "2\t1\t1" };
        out.push_str(&format!("{w}\t{r}\n"));
    }
    for w in spec.jargon_word_list() {
        out.push_str(&format!("{w}\t1\t1\t0\n"));
    }
    for w in spec.general_words() {
        out.push_str(&format!("{w}\t0\t0\t0\n"));
    }
    out
}

/// Writes the cohort dump, a background dump, ratings for every generated
/// word, the banned list, the manifest and the per-day truth into `dir`.
pub fn generate_cohort(spec: &SynthSpec, dir: &Path) -> Result<(CohortArtifacts, CohortPlan)> {
    let plan = plan_cohort(spec)?;
    let (records, truth, counts) = render_records(&plan);
    let background = background_records(spec);
    let paths = CohortArtifacts::in_dir(dir);
    write_ndjson(&paths.dump, &records)?;
    write_ndjson(&paths.background, &background)?;
    write_atomic(&paths.ratings, ratings_tsv(spec).as_bytes())?;
    write_atomic(&paths.banned, (spec.banned_list().join("\n") + "\n").as_bytes())?;

    let mut t = String::from("user\tday\trelative_day\tscope\ttokens\thate\n");
    for d in &truth {
        t.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            plan.users[d.user_index].name,
            iso_date(d.day),
            d.relative_day,
            d.scope,
            d.tokens,
            d.hate
        ));
    }
    write_atomic(&paths.truth, t.as_bytes())?;

    let [all, inside, outside] = counts;
    let manifest = Manifest {
        seed: spec.seed,
        target: spec.target.clone(),
        mode: spec.mode,
        beta: spec.beta,
        planted_relative_increase_pct: spec.planted_relative_increase().ok(),
        inside_share: spec.inside_share,
        inside_rate: spec.inside_rate,
        hate_words: spec.hate_word_list(),
        jargon_words: spec.jargon_word_list(),
        banned: spec.banned_list(),
        users: plan
            .users
            .iter()
            .map(|u| ManifestUser {
                name: u.name.clone(),
                role: u.role,
                partner_name: match u.role {
                    Role::Control { partner, .. } => Some(plan.users[partner].name.clone()),
                    _ => None,
                },
                day0: iso_date(u.day0),
                created: iso_date(u.created_day),
                short_lived: u.short_lived,
            })
            .collect(),
        word_counts: [("all", all), ("inside", inside), ("outside", outside)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        records: records.len(),
        background_records: background.len(),
    };
    write_json(&paths.manifest, &manifest)?;
    Ok((paths, plan))
}

/// A large dump of small random posts for throughput checks.
pub fn write_bulk_dump(path: &Path, records: usize, seed: u64) -> Result<()> {
    let mut rng = stream_rng(seed, 1 << 44);
    let mut w = AtomicWriter::create(path)?;
    let mut line = String::with_capacity(256);
    for i in 0..records {
        line.clear();
        let words: Vec<String> = (0..rng.random_range(3..12))
            .map(|_| format!("w{:04}", rng.random_range(0..2000)))
            .collect();
        let rec = PostRecord {
            id: format!("b{i:08}"),
            author: format!("u{:05}", rng.random_range(0..50_000)),
            subreddit: format!("sub{:03}", rng.random_range(0..500)),
            created_utc: 1_420_070_400 + rng.random_range(0..63_072_000),
            body: words.join(" "),
            kind: PostKind::Comment,
            score: rng.random_range(-5..100),
            author_created_utc: None,
        };
        line.push_str(&serde_json::to_string(&rec).map_err(|e| Error::io(path, e.into()))?);
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.commit()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_keeps_every_word() {
        let mut rng = stream_rng(1, 1);
        let body = compose(&mut rng, vec!["w0001", "slur02", "w0003"]);
        let toks = crate::corpus::tokenize(&body, &crate::corpus::Stopwords::english());
        let mut sorted = toks.clone();
        sorted.sort();
        assert_eq!(sorted, ["slur02", "w0001", "w0003"]);
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SynthSpec {
            treatments: 4,
            pre_days: 20,
            post_days: 10,
            long_tail_day: None,
            background_tokens: 2_000,
            mode: HateMode::Exact,
            ..SynthSpec::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_cohort(&spec, a.path()).unwrap();
        generate_cohort(&spec, b.path()).unwrap();
        for f in ["posts.ndjson", "background.ndjson", "manifest.json", "truth_days.tsv", "ratings.tsv"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }
}
