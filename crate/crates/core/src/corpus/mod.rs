//! Post-dump ingestion and the author/subreddit-indexed corpus store.

mod bots;
mod tokenize;

pub use bots::{default_keywords, filter_bots, matched_keywords, BotFilterReport, DEFAULT_BOT_KEYWORDS};
pub use tokenize::{tokenize, tokens, Stopwords};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::calendar::{day_of, Day};
use crate::error::{Error, Result};
use crate::fsutil::{write_json, AtomicWriter};

/// Authors that stand for removed accounts, never treated as members.
pub const PLACEHOLDER_AUTHORS: [&str; 2] = ["[deleted]", "[removed]"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostKind {
    Submission,
    Comment,
}

/// One submission or comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    pub author: String,
    pub subreddit: String,
    pub created_utc: i64,
    pub body: String,
    pub kind: PostKind,
    #[serde(default)]
    pub score: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_created_utc: Option<i64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LooseNumber {
    Int(i64),
    Float(f64),
    Text(String),
}

impl LooseNumber {
    fn as_i64(&self) -> Option<i64> {
        match self {
            LooseNumber::Int(v) => Some(*v),
            LooseNumber::Float(v) if v.is_finite() => Some(v.trunc() as i64),
            LooseNumber::Float(_) => None,
            LooseNumber::Text(s) => {
                let s = s.trim();
                s.parse::<i64>()
                    .ok()
                    .or_else(|| s.parse::<f64>().ok().filter(|v| v.is_finite()).map(|v| v.trunc() as i64))
            }
        }
    }
}

fn loose_i64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<i64>, D::Error> {
    Ok(Option::<LooseNumber>::deserialize(d)?.and_then(|n| n.as_i64()))
}

/// Dump line as found in the wild; extra fields are ignored.
#[derive(Deserialize)]
struct RawPost {
    id: Option<String>,
    author: Option<String>,
    subreddit: Option<String>,
    #[serde(default, deserialize_with = "loose_i64")]
    created_utc: Option<i64>,
    body: Option<String>,
    title: Option<String>,
    selftext: Option<String>,
    kind: Option<String>,
    #[serde(default, deserialize_with = "loose_i64")]
    score: Option<i64>,
    #[serde(default, deserialize_with = "loose_i64")]
    author_created_utc: Option<i64>,
}

impl RawPost {
    fn into_record(self, fallback_id: impl FnOnce() -> String) -> Option<PostRecord> {
        let author = self.author.filter(|a| !a.is_empty())?;
        let subreddit = self.subreddit.filter(|s| !s.is_empty())?;
        let created_utc = self.created_utc.filter(|&t| t > 0)?;
        let kind = match self.kind.as_deref() {
            Some("submission") | Some("t3") => PostKind::Submission,
            Some("comment") | Some("t1") => PostKind::Comment,
            Some(_) => return None,
            None if self.body.is_some() => PostKind::Comment,
            None => PostKind::Submission,
        };
        let body = match (self.body, self.title, self.selftext) {
            (Some(b), _, _) => b,
            (None, None, None) => return None,
            (None, t, s) => {
                let mut text = t.unwrap_or_default();
                if let Some(s) = s {
                    if !text.is_empty() {
                        text.push('\n');
                    }
                    text.push_str(&s);
                }
                text
            }
        };
        Some(PostRecord {
            id: self.id.filter(|i| !i.is_empty()).unwrap_or_else(fallback_id),
            author,
            subreddit,
            created_utc,
            body,
            kind,
            score: self.score.unwrap_or(0),
            author_created_utc: self.author_created_utc.filter(|&t| t > 0),
        })
    }
}

/// Opens a dump, transparently decompressing `.zst` and `.gz` files.
pub fn open_dump(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let reader: Box<dyn Read + Send> = match ext {
        "zst" | "zstd" => {
            let mut dec = zstd::stream::read::Decoder::new(file).map_err(|e| Error::io(path, e))?;
            // monthly dumps are compressed with a 2 GiB window
            dec.window_log_max(31).map_err(|e| Error::io(path, e))?;
            Box::new(dec)
        }
        "gz" => Box::new(flate2::read::MultiGzDecoder::new(file)),
        _ => Box::new(file),
    };
    Ok(Box::new(BufReader::with_capacity(1 << 20, reader)))
}

#[derive(Debug, Default)]
struct FileBatch {
    records: Vec<PostRecord>,
    lines: u64,
    rejected: u64,
}

fn parse_dump(path: &Path) -> Result<FileBatch> {
    let mut reader = open_dump(path)?;
    let stem = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut batch = FileBatch::default();
    let mut buf = Vec::with_capacity(4096);
    let mut line_no = 0usize;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if buf.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        batch.lines += 1;
        let parsed = serde_json::from_slice::<RawPost>(&buf)
            .ok()
            .and_then(|raw| raw.into_record(|| format!("{stem}:{line_no}")));
        match parsed {
            Some(rec) => batch.records.push(rec),
            None => batch.rejected += 1,
        }
    }
    Ok(batch)
}

/// Summary of an ingested corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusHandle {
    pub location: Option<PathBuf>,
    pub input_lines: u64,
    pub records: u64,
    pub authors: u64,
    pub subreddits: u64,
    pub errors: u64,
}

/// Post with interned author and subreddit.
#[derive(Debug, Clone)]
pub struct Post {
    pub id: String,
    pub author: u32,
    pub subreddit: u32,
    pub created_utc: i64,
    pub kind: PostKind,
    pub score: i64,
    pub body: String,
    pub author_created_utc: Option<i64>,
}

impl Post {
    pub fn day(&self) -> Day {
        day_of(self.created_utc)
    }
}

/// In-memory corpus indexed by author and subreddit.
///
/// Posts are ordered by (author, created_utc, id, ...), so one author's
/// posts form a contiguous, time-sorted slice.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    posts: Vec<Post>,
    authors: Vec<String>,
    subreddits: Vec<String>,
    author_ids: HashMap<String, u32>,
    subreddit_ids: HashMap<String, u32>,
    author_ranges: Vec<Range<usize>>,
    subreddit_posts: Vec<Vec<u32>>,
    input_lines: u64,
    errors: u64,
    location: Option<PathBuf>,
}

fn record_order(a: &PostRecord, b: &PostRecord) -> std::cmp::Ordering {
    (&a.author, a.created_utc, &a.id, a.kind, &a.subreddit, a.score, &a.body)
        .cmp(&(&b.author, b.created_utc, &b.id, b.kind, &b.subreddit, b.score, &b.body))
}

impl Corpus {
    /// Builds the store from parsed records; input order does not matter.
    pub fn from_records(mut records: Vec<PostRecord>, input_lines: u64, errors: u64) -> Self {
        records.par_sort_unstable_by(record_order);

        let subreddit_set: BTreeSet<&str> = records.iter().map(|r| r.subreddit.as_str()).collect();
        let subreddits: Vec<String> = subreddit_set.into_iter().map(str::to_string).collect();
        let subreddit_ids: HashMap<String, u32> = subreddits
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();

        let mut authors: Vec<String> = Vec::new();
        let mut author_ranges: Vec<Range<usize>> = Vec::new();
        let mut posts = Vec::with_capacity(records.len());
        let mut subreddit_posts = vec![Vec::new(); subreddits.len()];
        for (idx, rec) in records.into_iter().enumerate() {
            if authors.last() != Some(&rec.author) {
                authors.push(rec.author.clone());
                author_ranges.push(idx..idx);
            }
            author_ranges.last_mut().expect("range pushed").end = idx + 1;
            let sid = subreddit_ids[&rec.subreddit];
            subreddit_posts[sid as usize].push(idx as u32);
            posts.push(Post {
                id: rec.id,
                author: (authors.len() - 1) as u32,
                subreddit: sid,
                created_utc: rec.created_utc,
                kind: rec.kind,
                score: rec.score,
                body: rec.body,
                author_created_utc: rec.author_created_utc,
            });
        }
        let author_ids = authors
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i as u32))
            .collect();
        Corpus {
            posts,
            authors,
            subreddits,
            author_ids,
            subreddit_ids,
            author_ranges,
            subreddit_posts,
            input_lines,
            errors,
            location: None,
        }
    }

    pub fn handle(&self) -> CorpusHandle {
        CorpusHandle {
            location: self.location.clone(),
            input_lines: self.input_lines,
            records: self.posts.len() as u64,
            authors: self.authors.len() as u64,
            subreddits: self.subreddits.len() as u64,
            errors: self.errors,
        }
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn authors(&self) -> &[String] {
        &self.authors
    }

    pub fn subreddits(&self) -> &[String] {
        &self.subreddits
    }

    pub fn author_name(&self, id: u32) -> &str {
        &self.authors[id as usize]
    }

    pub fn subreddit_name(&self, id: u32) -> &str {
        &self.subreddits[id as usize]
    }

    pub fn author_id(&self, name: &str) -> Option<u32> {
        self.author_ids.get(name).copied()
    }

    pub fn subreddit_id(&self, name: &str) -> Option<u32> {
        self.subreddit_ids.get(name).copied()
    }

    /// Time-ordered posts of one author (empty when absent).
    pub fn posts_by_author(&self, name: &str) -> &[Post] {
        match self.author_id(name) {
            Some(id) => self.posts_by_author_id(id),
            None => &[],
        }
    }

    pub fn posts_by_author_id(&self, id: u32) -> &[Post] {
        &self.posts[self.author_ranges[id as usize].clone()]
    }

    pub fn posts_in_subreddit<'a>(&'a self, name: &str) -> impl Iterator<Item = &'a Post> + 'a {
        let ids: &'a [u32] = match self.subreddit_id(name) {
            Some(sid) => &self.subreddit_posts[sid as usize],
            None => &[],
        };
        ids.iter().map(move |&i| &self.posts[i as usize])
    }

    /// Distinct author ids that posted in a subreddit, ascending.
    pub fn author_ids_in(&self, sid: u32) -> Vec<u32> {
        let mut ids: Vec<u32> = self.subreddit_posts[sid as usize]
            .iter()
            .map(|&i| self.posts[i as usize].author)
            .collect();
        ids.dedup();
        ids
    }

    /// Writes the store into `dir` (`posts.jsonl` + `meta.json`).
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let posts_path = dir.join("posts.jsonl");
        let mut w = AtomicWriter::create(&posts_path)?;
        for post in &self.posts {
            let rec = self.record(post);
            serde_json::to_writer(&mut w, &rec)
                .map_err(|e| Error::io(&posts_path, std::io::Error::other(e)))?;
            w.write_all(b"\n").map_err(|e| Error::io(&posts_path, e))?;
        }
        w.commit()?;
        self.location = Some(dir.to_path_buf());
        let mut meta = self.handle();
        meta.location = None;
        write_json(dir.join("meta.json"), &meta)
    }

    /// Loads a store written by [`Corpus::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.json");
        let meta: CorpusHandle = serde_json::from_str(
            &std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?,
        )
        .map_err(|e| Error::Parse {
            path: meta_path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let posts_path = dir.join("posts.jsonl");
        let reader = BufReader::new(File::open(&posts_path).map_err(|e| Error::io(&posts_path, e))?);
        let mut records = Vec::with_capacity(meta.records as usize);
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(&posts_path, e))?;
            let rec: PostRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: posts_path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        let mut corpus = Corpus::from_records(records, meta.input_lines, meta.errors);
        corpus.location = Some(dir.to_path_buf());
        Ok(corpus)
    }

    pub fn record(&self, post: &Post) -> PostRecord {
        PostRecord {
            id: post.id.clone(),
            author: self.author_name(post.author).to_string(),
            subreddit: self.subreddit_name(post.subreddit).to_string(),
            created_utc: post.created_utc,
            body: post.body.clone(),
            kind: post.kind,
            score: post.score,
            author_created_utc: post.author_created_utc,
        }
    }
}

/// Parses every dump (files in parallel) into a corpus store. Malformed
/// lines are counted, never fatal; unreadable files are.
pub fn ingest_posts(paths: &[PathBuf]) -> Result<Corpus> {
    let batches: Vec<FileBatch> = paths
        .par_iter()
        .map(|p| parse_dump(p))
        .collect::<Result<Vec<_>>>()?;
    let mut lines = 0;
    let mut rejected = 0;
    let mut records = Vec::with_capacity(batches.iter().map(|b| b.records.len()).sum());
    for b in batches {
        lines += b.lines;
        rejected += b.rejected;
        records.extend(b.records);
    }
    Ok(Corpus::from_records(records, lines, rejected))
}

/// Usernames that posted in `subreddit`, each once. Placeholder authors and
/// anyone in `exclude` are dropped.
pub fn extract_members(corpus: &Corpus, subreddit: &str, exclude: Option<&BTreeSet<String>>) -> BTreeSet<String> {
    let Some(sid) = corpus.subreddit_id(subreddit) else {
        return BTreeSet::new();
    };
    corpus
        .author_ids_in(sid)
        .into_iter()
        .map(|a| corpus.author_name(a))
        .filter(|a| !PLACEHOLDER_AUTHORS.contains(a))
        .filter(|a| exclude.is_none_or(|ex| !ex.contains(*a)))
        .map(str::to_string)
        .collect()
}

/// The `n` most active authors of a subreddit by post count (ties by name).
pub fn top_active_authors(corpus: &Corpus, subreddit: &str, n: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for post in corpus.posts_in_subreddit(subreddit) {
        *counts.entry(corpus.author_name(post.author)).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(n).map(|(a, _)| a.to_string()).collect()
}
