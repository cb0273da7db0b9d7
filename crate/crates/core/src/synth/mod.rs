//! Synthetic corpora and cohorts with known ground truth.

mod corpora;
mod plan;
mod render;
mod series;

pub use corpora::{generate_corpora, CorporaSpec, SyntheticCorpora};
pub use plan::{plan_cohort, CohortPlan, DayPlan, PostPlan, Role, UserPlan};
pub use render::{generate_cohort, render_records, write_bulk_dump, CohortArtifacts, Manifest, ManifestUser, TruthDay};
pub use series::{pre_series, PreSeriesSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::its::Coefficients;

/// How hate tokens are placed in a user-day of `n` tokens at rate `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HateMode {
    /// `round(r * n)` hate tokens.
    #[default]
    Exact,
    /// Binomial(n, r) hate tokens.
    Bernoulli,
}

/// Generator settings for a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub target: String,
    /// Earliest calendar date any user's window may start.
    pub start_date: String,
    pub treatments: usize,
    /// Controls generated per treatment; all inherit its day 0.
    pub controls_per_treatment: usize,
    /// Make the first control of each treatment an exact copy of its
    /// pre-activation history and the others perturbed decoys.
    pub twins: bool,
    /// Per-post chance that a decoy's copied post is altered.
    pub decoy_noise: f64,
    pub bots: usize,
    /// Non-target subreddits shared by the cohort.
    pub subreddits: usize,
    pub home_subreddits: usize,
    /// Non-target subreddits listed as banned (the target always is).
    pub banned_subreddits: usize,
    pub vocab: usize,
    pub hate_words: usize,
    pub jargon_words: usize,
    pub zipf_exponent: f64,
    /// Share of non-hate tokens inside the target that are jargon.
    pub jargon_rate: f64,
    pub beta: Coefficients,
    pub mode: HateMode,
    pub pre_days: i64,
    pub post_days: i64,
    /// Day 0 is drawn uniformly from this many days after the earliest start.
    pub activation_span_days: i64,
    /// Chance that a user is active on a given day of the window.
    pub activity: f64,
    pub tokens_min: u64,
    pub tokens_max: u64,
    pub max_posts_per_day: usize,
    /// Target-subreddit tokens of a treatment's post-join day, as a share of
    /// that day's outside tokens.
    pub inside_share: f64,
    /// Hate rate of target-subreddit posts.
    pub inside_rate: f64,
    /// Share of treatments whose last post comes within `short_lifespan_days` of day 0.
    pub short_lifespan_fraction: f64,
    pub short_lifespan_days: i64,
    /// Rate multiplier of short-lived treatments.
    pub short_rate_multiplier: f64,
    /// Extra active day of long-lived treatments, relative to day 0.
    pub long_tail_day: Option<i64>,
    pub background_users: usize,
    pub background_tokens: u64,
    pub background_hate_rate: f64,
    pub background_jargon_rate: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 1,
            target: "hatesub".into(),
            start_date: "2015-01-01".into(),
            treatments: 200,
            controls_per_treatment: 5,
            twins: true,
            decoy_noise: 0.5,
            bots: 3,
            subreddits: 30,
            home_subreddits: 4,
            banned_subreddits: 5,
            vocab: 2000,
            hate_words: 20,
            jargon_words: 20,
            zipf_exponent: 1.0,
            jargon_rate: 0.05,
            beta: Coefficients {
                constant: 0.02,
                time: 0.0,
                expos: 0.005,
                inter: 0.0,
                time_expos: 0.0,
                time_inter: 0.0,
                expos_inter: 0.0075,
                time_expos_inter: 0.0,
            },
            mode: HateMode::Bernoulli,
            pre_days: 300,
            post_days: 200,
            activation_span_days: 180,
            activity: 0.2,
            tokens_min: 40,
            tokens_max: 120,
            max_posts_per_day: 3,
            inside_share: 0.5,
            inside_rate: 0.1,
            short_lifespan_fraction: 0.0,
            short_lifespan_days: 180,
            short_rate_multiplier: 1.0,
            long_tail_day: Some(400),
            background_users: 200,
            background_tokens: 400_000,
            background_hate_rate: 0.0005,
            background_jargon_rate: 0.0005,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        let unit = [
            ("decoy_noise", self.decoy_noise),
            ("jargon_rate", self.jargon_rate),
            ("activity", self.activity),
            ("inside_share", self.inside_share),
            ("inside_rate", self.inside_rate),
            ("short_lifespan_fraction", self.short_lifespan_fraction),
            ("background_hate_rate", self.background_hate_rate),
            ("background_jargon_rate", self.background_jargon_rate),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("synth.{name} = {v} is outside [0, 1]"));
            }
        }
        if self.background_hate_rate + self.background_jargon_rate > 1.0 {
            return bad("background hate and jargon rates exceed 1".into());
        }
        if self.target.is_empty() {
            return bad("synth.target is empty".into());
        }
        if crate::calendar::parse_iso_date(&self.start_date).is_none() {
            return bad(format!("synth.start_date `{}` is not YYYY-MM-DD", self.start_date));
        }
        if self.treatments == 0 {
            return bad("synth.treatments must be positive".into());
        }
        if self.vocab == 0 || self.hate_words == 0 {
            return bad("synth.vocab and synth.hate_words must be positive".into());
        }
        if self.subreddits == 0 || self.home_subreddits == 0 || self.home_subreddits > self.subreddits {
            return bad("need 1 <= synth.home_subreddits <= synth.subreddits".into());
        }
        if self.banned_subreddits > self.subreddits {
            return bad("synth.banned_subreddits exceeds synth.subreddits".into());
        }
        if self.tokens_min == 0 || self.tokens_min > self.tokens_max {
            return bad("need 1 <= synth.tokens_min <= synth.tokens_max".into());
        }
        if self.max_posts_per_day == 0 {
            return bad("synth.max_posts_per_day must be positive".into());
        }
        if self.pre_days < 1 || self.post_days < 0 || self.activation_span_days < 0 {
            return bad("synth.pre_days must be positive and post/activation spans non-negative".into());
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return bad("synth.zipf_exponent must be finite and non-negative".into());
        }
        if !(self.short_rate_multiplier.is_finite() && self.short_rate_multiplier >= 0.0) {
            return bad("synth.short_rate_multiplier must be finite and non-negative".into());
        }
        if self.short_lifespan_days < 0 || self.short_lifespan_days > 365 {
            return bad("synth.short_lifespan_days must lie in [0, 365]".into());
        }
        if let Some(t) = self.long_tail_day {
            if t <= 365 {
                return bad("synth.long_tail_day must exceed 365".into());
            }
        }
        Ok(())
    }

    /// Planted `100 (inter + expos_inter) / (const + expos)`.
    pub fn planted_relative_increase(&self) -> Result<f64> {
        self.beta.relative_increase()
    }

    pub fn general_words(&self) -> Vec<String> {
        (0..self.vocab).map(|i| format!("w{i:04}")).collect()
    }

    pub fn hate_word_list(&self) -> Vec<String> {
        (0..self.hate_words).map(|i| format!("slur{i:02}")).collect()
    }

    pub fn jargon_word_list(&self) -> Vec<String> {
        (0..self.jargon_words).map(|i| format!("jarg{i:02}")).collect()
    }

    pub fn subreddit_names(&self) -> Vec<String> {
        std::iter::once(self.target.clone())
            .chain((0..self.subreddits).map(|i| format!("sub{i:02}")))
            .collect()
    }

    pub fn banned_list(&self) -> Vec<String> {
        self.subreddit_names()[..=self.banned_subreddits].to_vec()
    }
}

/// Unnormalized Zipf weights `1 / rank^s`.
pub fn zipf_weights(n: usize, s: f64) -> Vec<f64> {
    (1..=n).map(|r| (r as f64).powf(-s)).collect()
}

/// Independent deterministic stream `stream` of `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid() {
        SynthSpec::default().validate().unwrap();
        let r = SynthSpec::default().planted_relative_increase().unwrap();
        assert!((r - 30.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_rates() {
        let spec = SynthSpec {
            activity: 1.5,
            ..SynthSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = SynthSpec::default();
        let text = toml::to_string(&spec).unwrap();
        let back: SynthSpec = toml::from_str(&text).unwrap();
        assert_eq!(spec, back);
        assert!(toml::from_str::<SynthSpec>("bogus = 1").is_err());
    }
}
