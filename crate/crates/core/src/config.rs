//! Run configuration: a sectioned TOML file whose defaults reproduce the
//! standard methodology.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cohort::{DEFAULT_CAP_RATIO, DEFAULT_CONTROL_SUBREDDITS, DEFAULT_FEATURE_SUBREDDITS, DEFAULT_TREATMENT_CAP};
use crate::corpus::DEFAULT_BOT_KEYWORDS;
use crate::error::{Error, Result};
use crate::its::{Granularity, Weighting, DEFAULT_CV_ROUNDS, MIN_BANDWIDTH};
use crate::lexicon::{Scope, DEFAULT_CANDIDATES};
use crate::synth::SynthSpec;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub lexicon: LexiconSection,
    pub bots: BotSection,
    pub cohort: CohortSection,
    pub its: ItsSection,
    pub analysis: AnalysisSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Subreddit whose members form the treatment group.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Post dumps (line-delimited JSON, optionally .gz or .zst).
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            target: None,
            inputs: Vec::new(),
            out: PathBuf::from("out"),
            seed: 0,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconSection {
    /// Dumps forming the background corpus.
    pub background: Vec<PathBuf>,
    /// Rater scores, TSV `word r1 r2 r3`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratings: Option<PathBuf>,
    /// Stopword file; the bundled English list when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
    /// Fixed L1 penalty; otherwise `lambda_scale * sqrt(C)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub lambda_scale: f64,
    pub candidates: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Example posts exported per candidate.
    pub contexts: usize,
}

impl Default for LexiconSection {
    fn default() -> Self {
        LexiconSection {
            background: Vec::new(),
            ratings: None,
            stopwords: None,
            lambda: None,
            lambda_scale: 1.0,
            candidates: DEFAULT_CANDIDATES,
            max_iter: 10_000,
            tol: 1e-13,
            contexts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BotSection {
    pub keywords: Vec<String>,
    /// Manually confirmed bots; without it every flagged name is removed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confirmed: Option<PathBuf>,
    /// Also drop this many most active target authors.
    pub top_active: usize,
}

impl Default for BotSection {
    fn default() -> Self {
        BotSection {
            keywords: DEFAULT_BOT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            confirmed: None,
            top_active: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSection {
    pub control_subreddits: usize,
    pub feature_subreddits: usize,
    pub cap_ratio: usize,
    pub treatment_cap: usize,
}

impl Default for CohortSection {
    fn default() -> Self {
        CohortSection {
            control_subreddits: DEFAULT_CONTROL_SUBREDDITS,
            feature_subreddits: DEFAULT_FEATURE_SUBREDDITS,
            cap_ratio: DEFAULT_CAP_RATIO,
            treatment_cap: DEFAULT_TREATMENT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItsSection {
    pub bandwidth_min: u32,
    pub bandwidth_max: u32,
    pub bandwidth_step: u32,
    pub cv_rounds: u32,
    /// Skip cross-validation and fit at this bandwidth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<u32>,
    pub granularity: Granularity,
    pub weighting: Weighting,
    /// Which posts feed the regression.
    pub scope: Scope,
    pub confidence: f64,
}

impl Default for ItsSection {
    fn default() -> Self {
        ItsSection {
            bandwidth_min: MIN_BANDWIDTH,
            bandwidth_max: 365,
            bandwidth_step: 5,
            cv_rounds: DEFAULT_CV_ROUNDS,
            bandwidth: None,
            granularity: Granularity::UserDay,
            weighting: Weighting::Unweighted,
            scope: Scope::Outside,
            confidence: 0.95,
        }
    }
}

impl ItsSection {
    pub fn bandwidths(&self) -> Vec<u32> {
        (self.bandwidth_min..=self.bandwidth_max)
            .step_by(self.bandwidth_step.max(1) as usize)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Banned-subreddit list, one name per line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub banned: Option<PathBuf>,
    pub lifespan_days: i64,
    pub lifespan_scope: Scope,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            banned: None,
            lifespan_days: crate::analysis::DEFAULT_LIFESPAN_DAYS,
            lifespan_scope: Scope::Outside,
        }
    }
}

fn resolve(p: &mut PathBuf, base: &Path, out: &Path) {
    let text = p.to_string_lossy();
    if text.contains("{out}") {
        *p = PathBuf::from(text.replace("{out}", &out.to_string_lossy()));
    } else if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`; relative paths inside are taken from its directory.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_out(path, None)
    }

    /// Expands `{out}` and anchors relative paths at `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let out = self.run.out.clone();
        let mut all: Vec<&mut PathBuf> = self.run.inputs.iter_mut().collect();
        all.extend(self.lexicon.background.iter_mut());
        all.extend(self.lexicon.ratings.as_mut());
        all.extend(self.lexicon.stopwords.as_mut());
        all.extend(self.bots.confirmed.as_mut());
        all.extend(self.analysis.banned.as_mut());
        for p in all {
            resolve(p, base, &out);
        }
    }

    /// Like [`RunConfig::load`], with `out` replacing `run.out` before
    /// `{out}` is expanded.
    pub fn load_with_out(path: &Path, out: Option<&Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        match out {
            Some(o) => cfg.run.out = o.to_path_buf(),
            None if cfg.run.out.is_relative() => cfg.run.out = base.join(&cfg.run.out),
            None => {}
        }
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn target(&self) -> Result<&str> {
        self.run
            .target
            .as_deref()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::Config("missing field `run.target` (the target subreddit)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let its = &self.its;
        if its.bandwidth_min < MIN_BANDWIDTH || its.bandwidth_min > its.bandwidth_max || its.bandwidth_step == 0 {
            return Err(Error::Config(format!(
                "`its` bandwidth range {}..={} step {} is invalid (minimum {MIN_BANDWIDTH})",
                its.bandwidth_min, its.bandwidth_max, its.bandwidth_step
            )));
        }
        if !(0.0 < its.confidence && its.confidence < 1.0) {
            return Err(Error::Config("`its.confidence` must lie in (0, 1)".into()));
        }
        if self.lexicon.candidates == 0 {
            return Err(Error::Config("`lexicon.candidates` must be positive".into()));
        }
        if self.cohort.cap_ratio == 0 || self.cohort.treatment_cap == 0 {
            return Err(Error::Config("`cohort.cap_ratio` and `cohort.treatment_cap` must be positive".into()));
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.lexicon.candidates, 300);
        assert_eq!(cfg.cohort.control_subreddits, 30);
        assert_eq!(cfg.cohort.feature_subreddits, 50);
        assert_eq!(cfg.cohort.cap_ratio, 5);
        assert_eq!(cfg.cohort.treatment_cap, 15_000);
        assert_eq!(cfg.its.cv_rounds, 100);
        assert_eq!(cfg.its.bandwidths().first(), Some(&30));
        assert_eq!(cfg.its.bandwidths().last(), Some(&365));
        assert_eq!(cfg.its.granularity, Granularity::UserDay);
        assert!(cfg.target().is_err());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("[cohort]\ncap_ration = 4\n").unwrap_err().to_string();
        assert!(err.contains("cap_ration"), "{err}");
    }

    #[test]
    fn out_placeholder_expands() {
        let mut cfg = RunConfig::parse("[run]\ntarget = \"t\"\ninputs = [\"{out}/synth/posts.ndjson\", \"raw.ndjson\"]\nout = \"/tmp/o\"\n").unwrap();
        cfg.resolve_paths(Path::new("/cfg"));
        assert_eq!(cfg.run.inputs[0], PathBuf::from("/tmp/o/synth/posts.ndjson"));
        assert_eq!(cfg.run.inputs[1], PathBuf::from("/cfg/raw.ndjson"));
    }
}
