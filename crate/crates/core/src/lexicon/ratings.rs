use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::sage::Candidate;
use crate::error::{Error, Result};
use crate::fsutil::{tsv_cell, AtomicWriter};

/// Minimum summed rating for a word to enter the lexicon.
pub const RATING_THRESHOLD: u32 = 4;

/// Three independent ratings: 0 not hate, 1 maybe, 2 always.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatedWord {
    pub word: String,
    pub ratings: [u8; 3],
}

impl RatedWord {
    pub fn new(word: impl Into<String>, ratings: [i64; 3]) -> Result<Self> {
        let word = word.into();
        let mut out = [0u8; 3];
        for (slot, &r) in out.iter_mut().zip(&ratings) {
            if !(0..=2).contains(&r) {
                return Err(Error::RatingOutOfRange { word, value: r });
            }
            *slot = r as u8;
        }
        Ok(RatedWord { word, ratings: out })
    }

    pub fn sum(&self) -> u32 {
        self.ratings.iter().map(|&r| r as u32).sum()
    }
}

/// Parses `word⇥r1⇥r2⇥r3` rows. A leading header row is skipped.
pub fn parse_ratings(text: &str, path: &Path) -> Result<BTreeMap<String, RatedWord>> {
    let mut table = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if cols.len() != 4 {
            return Err(parse_err(format!("expected 4 tab-separated columns, found {}", cols.len())));
        }
        let values: std::result::Result<Vec<i64>, _> = cols[1..].iter().map(|c| c.trim().parse::<i64>()).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if table.is_empty() && i == 0 => continue,
            Err(e) => return Err(parse_err(format!("bad rating: {e}"))),
        };
        let word = cols[0].trim().to_lowercase();
        let rated = RatedWord::new(word.clone(), [values[0], values[1], values[2]])?;
        table.insert(word, rated);
    }
    Ok(table)
}

pub fn read_ratings(path: &Path) -> Result<BTreeMap<String, RatedWord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(&text, path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LexiconEntry {
    pub word: String,
    pub eta: f64,
    pub rating_sum: u32,
}

/// Adjudicated hate words of one community.
#[derive(Debug, Clone)]
pub struct HateLexicon {
    pub community: String,
    /// Sorted by eta descending, then word.
    entries: Vec<LexiconEntry>,
    words: HashSet<String>,
}

impl HateLexicon {
    pub fn new(community: impl Into<String>, mut entries: Vec<LexiconEntry>) -> Self {
        entries.sort_by(|a, b| b.eta.total_cmp(&a.eta).then_with(|| a.word.cmp(&b.word)));
        let words = entries.iter().map(|e| e.word.clone()).collect();
        HateLexicon {
            community: community.into(),
            entries,
            words,
        }
    }

    /// Lexicon from a bare word list (eta 0, rating sum 6).
    pub fn from_words<I, S>(community: &str, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries = words
            .into_iter()
            .map(|w| LexiconEntry {
                word: w.into(),
                eta: 0.0,
                rating_sum: 6,
            })
            .collect();
        Self::new(community, entries)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes `word⇥eta⇥rating_sum`, eta descending.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut w = AtomicWriter::create(path)?;
        let mut out = String::from("word\teta\trating_sum\n");
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.word, e.eta, e.rating_sum));
        }
        w.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
        w.commit()
    }

    pub fn read_tsv(path: &Path, community: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.starts_with("word\t") || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |m: &str| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: m.to_string(),
            };
            if cols.len() != 3 {
                return Err(bad("expected word, eta, rating_sum"));
            }
            entries.push(LexiconEntry {
                word: cols[0].to_string(),
                eta: cols[1].parse().map_err(|_| bad("bad eta"))?,
                rating_sum: cols[2].parse().map_err(|_| bad("bad rating sum"))?,
            });
        }
        Ok(Self::new(community, entries))
    }
}

/// Keeps candidates whose summed rating reaches [`RATING_THRESHOLD`].
pub fn apply_ratings(community: &str, candidates: &[Candidate], ratings: &BTreeMap<String, RatedWord>) -> Result<HateLexicon> {
    let missing: Vec<String> = candidates
        .iter()
        .filter(|c| !ratings.contains_key(&c.word))
        .map(|c| c.word.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingRatings(missing));
    }
    let entries = candidates
        .iter()
        .filter_map(|c| {
            let sum = ratings[&c.word].sum();
            (sum >= RATING_THRESHOLD).then(|| LexiconEntry {
                word: c.word.clone(),
                eta: c.eta,
                rating_sum: sum,
            })
        })
        .collect();
    Ok(HateLexicon::new(community, entries))
}

/// Writes the rater worksheet: `word⇥eta⇥context1⇥context2⇥context3`.
pub fn write_candidates_tsv(path: &Path, candidates: &[Candidate], contexts: &BTreeMap<String, Vec<String>>) -> Result<()> {
    let mut out = String::from("word\teta\tcontext1\tcontext2\tcontext3\n");
    for c in candidates {
        out.push_str(&c.word);
        out.push('\t');
        out.push_str(&c.eta.to_string());
        let ctx = contexts.get(&c.word).map(Vec::as_slice).unwrap_or(&[]);
        for slot in 0..3 {
            out.push('\t');
            if let Some(s) = ctx.get(slot) {
                out.push_str(&tsv_cell(s));
            }
        }
        out.push('\n');
    }
    crate::fsutil::write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(w: &str, eta: f64) -> Candidate {
        Candidate {
            word: w.into(),
            eta,
        }
    }

    fn table(rows: &[(&str, [i64; 3])]) -> BTreeMap<String, RatedWord> {
        rows.iter()
            .map(|(w, r)| (w.to_string(), RatedWord::new(*w, *r).unwrap()))
            .collect()
    }

    #[test]
    fn threshold_is_four() {
        let cands = [cand("aa", 3.0), cand("bb", 2.0), cand("cc", 1.0)];
        let lex = apply_ratings("t", &cands, &table(&[("aa", [2, 2, 0]), ("bb", [1, 1, 1]), ("cc", [0, 0, 0])])).unwrap();
        assert_eq!(lex.len(), 1);
        assert!(lex.contains("aa"));
        assert_eq!(lex.entries()[0].rating_sum, 4);
    }

    #[test]
    fn missing_rows_are_listed() {
        let err = apply_ratings("t", &[cand("aa", 1.0), cand("zz", 0.5)], &table(&[("aa", [2, 2, 2])])).unwrap_err();
        assert!(matches!(err, Error::MissingRatings(ref m) if m == &vec!["zz".to_string()]));
    }

    #[test]
    fn out_of_range_rating() {
        let err = parse_ratings("word\tr1\tr2\tr3\naa\t2\t3\t0\n", Path::new("r.tsv")).unwrap_err();
        assert!(matches!(err, Error::RatingOutOfRange { value: 3, .. }));
    }

    #[test]
    fn lexicon_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lex = HateLexicon::new(
            "t",
            vec![
                LexiconEntry { word: "bb".into(), eta: 0.5, rating_sum: 5 },
                LexiconEntry { word: "aa".into(), eta: 1.25, rating_sum: 6 },
            ],
        );
        let p = dir.path().join("lex.tsv");
        lex.write_tsv(&p).unwrap();
        let back = HateLexicon::read_tsv(&p, "t").unwrap();
        assert_eq!(back.entries(), lex.entries());
        assert_eq!(back.entries()[0].word, "aa");
    }

    proptest::proptest! {
        #[test]
        fn raising_a_rating_never_removes_a_word(r in proptest::array::uniform3(0i64..=2), slot in 0usize..3) {
            let cands = [cand("w", 1.0)];
            let before = apply_ratings("t", &cands, &table(&[("w", r)])).unwrap();
            let mut raised = r;
            raised[slot] = (raised[slot] + 1).min(2);
            let after = apply_ratings("t", &cands, &table(&[("w", raised)])).unwrap();
            proptest::prop_assert!(before.len() <= after.len());
        }
    }
}
