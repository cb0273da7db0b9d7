use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

/// Username keywords that mark likely automated accounts.
pub const DEFAULT_BOT_KEYWORDS: [&str; 6] = ["bot", "auto", "transcriber", "gif", "link", "twitter"];

pub fn default_keywords() -> Vec<String> {
    DEFAULT_BOT_KEYWORDS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BotFilterReport {
    /// Flagged username → keywords it contains.
    pub flagged: BTreeMap<String, Vec<String>>,
    /// Manually confirmed bots, when a review file was supplied.
    pub confirmed: Option<BTreeSet<String>>,
    /// Names dropped from downstream cohorts.
    pub removed: BTreeSet<String>,
    pub total_usernames: usize,
    pub removal_fraction: f64,
}

impl BotFilterReport {
    pub fn is_removed(&self, name: &str) -> bool {
        self.removed.contains(name)
    }
}

/// Keywords of `keywords` contained in `name`, compared case-insensitively.
pub fn matched_keywords(name: &str, keywords: &[String]) -> Vec<String> {
    let lower = name.to_lowercase();
    keywords
        .iter()
        .filter(|k| lower.contains(&k.to_lowercase()))
        .cloned()
        .collect()
}

/// Flags usernames containing any keyword. Without a confirmed list every
/// flagged name is removed; with one, only the confirmed names are.
pub fn filter_bots<'a, I>(usernames: I, keywords: &[String], confirmed: Option<&BTreeSet<String>>) -> BotFilterReport
where
    I: IntoIterator<Item = &'a str>,
{
    let mut report = BotFilterReport {
        confirmed: confirmed.cloned(),
        ..Default::default()
    };
    for name in usernames {
        report.total_usernames += 1;
        let hits = matched_keywords(name, keywords);
        if !hits.is_empty() {
            report.flagged.insert(name.to_string(), hits);
        }
        let remove = match confirmed {
            Some(list) => list.contains(name),
            None => report.flagged.contains_key(name),
        };
        if remove {
            report.removed.insert(name.to_string());
        }
    }
    report.removal_fraction = if report.total_usernames == 0 {
        0.0
    } else {
        report.removed.len() as f64 / report.total_usernames as f64
    };
    report
}
