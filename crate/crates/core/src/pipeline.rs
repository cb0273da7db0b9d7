//! Stage orchestration over an output directory.
//!
//! Every stage reads its inputs from the artifacts of earlier stages and
//! writes its own subdirectory; nothing is kept in memory between stages,
//! so any stage can be rerun on its own.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::analysis::{
    cohort_tallies, compare_distributions, context_series, controls_of, lifespan_split, treatments_of,
    word_distribution, write_context_csv, write_lifespan_csv, write_spearman_json, write_word_freq_csv,
    SpearmanReport, UserTallies,
};
use crate::calendar::Day;
use crate::cohort::{
    activation_days, build_control_pool, match_pairs, rank_control_subreddits, read_pairs, sample_treatments,
    write_feature_audit, write_pairs, FeatureSpace, MatchedPair,
};
use crate::config::RunConfig;
use crate::corpus::{extract_members, filter_bots, ingest_posts, tokens, top_active_authors, Corpus, Stopwords};
use crate::error::{Error, Result};
use crate::fsutil::{read_lines, write_atomic, write_json};
use crate::its::{
    build_design, cv_bandwidth, fit_ols, group_daily_means, sensitivity_sweep, write_daily_means_csv, write_fit_json,
    write_plot_lines_csv, write_sweep_csv, BandwidthSearch, DesignOptions, COLUMN_NAMES,
};
use crate::lexicon::{
    apply_ratings, fit_sage, read_ratings, select_candidates, write_candidates_tsv, Candidate, DailyPoint, HateLexicon,
    SageOptions, Scope, ScopeContext, VocabCounts,
};
use crate::synth::generate_cohort;

/// Pipeline stages in execution order (`All` chains the rest).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Ingest,
    Lexicon,
    Cohort,
    Match,
    Its,
    Sensitivity,
    Analyze,
    All,
}

impl Stage {
    pub const CHAIN: [Stage; 7] = [
        Stage::Ingest,
        Stage::Lexicon,
        Stage::Cohort,
        Stage::Match,
        Stage::Its,
        Stage::Sensitivity,
        Stage::Analyze,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Lexicon => "lexicon",
            Stage::Cohort => "cohort",
            Stage::Match => "match",
            Stage::Its => "its",
            Stage::Sensitivity => "sensitivity",
            Stage::Analyze => "analyze",
            Stage::All => "all",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Stage::Synth,
            Stage::Ingest,
            Stage::Lexicon,
            Stage::Cohort,
            Stage::Match,
            Stage::Its,
            Stage::Sensitivity,
            Stage::Analyze,
            Stage::All,
        ]
        .into_iter()
        .find(|st| st.name() == s)
        .ok_or_else(|| Error::InvalidInput(format!("unknown stage `{s}`")))
    }
}

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.name())
    }

    pub fn file(&self, stage: Stage, name: &str) -> PathBuf {
        self.dir(stage).join(name)
    }

    pub fn resolved_config(&self) -> PathBuf {
        self.out.join("config.resolved.toml")
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.out.join("corpus")
    }
}

/// Fails with the producing stage's name when `path` is absent.
fn require(path: PathBuf, stage: Stage) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, stage: stage.name() })
    }
}

fn write_list(path: &Path, items: impl IntoIterator<Item = impl AsRef<str>>) -> Result<()> {
    let mut out = String::new();
    for it in items {
        out.push_str(it.as_ref());
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[derive(Serialize)]
struct IngestReport<'a> {
    inputs: &'a [PathBuf],
    input_lines: u64,
    records: u64,
    malformed: u64,
    authors: u64,
    subreddits: u64,
}

#[derive(Serialize)]
struct SageReport<'a> {
    lambda: f64,
    iterations: usize,
    converged: bool,
    objective: f64,
    vocabulary: usize,
    target_tokens: u64,
    background_tokens: u64,
    nonzero: usize,
    candidates: &'a [Candidate],
}

#[derive(Serialize)]
struct BotsReport<'a> {
    #[serde(flatten)]
    filter: &'a crate::corpus::BotFilterReport,
    top_active: &'a [String],
}

#[derive(Serialize)]
struct ItsSummary {
    pairs: usize,
    scope: Scope,
    granularity: crate::its::Granularity,
    weighting: crate::its::Weighting,
    bandwidth: u32,
    bandwidth_source: &'static str,
    treatment_points: usize,
    control_points: usize,
    relative_increase_pct: Option<f64>,
    coefficients: BTreeMap<&'static str, f64>,
}

/// Inputs shared by the stages that measure matched users.
struct Measured {
    corpus: Corpus,
    pairs: Vec<MatchedPair>,
    treatments: Vec<UserTallies>,
    controls: Vec<UserTallies>,
    ctx: ScopeContext,
    lexicon: HateLexicon,
    stopwords: Stopwords,
}

pub struct Pipeline {
    cfg: RunConfig,
    layout: Layout,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout { out: cfg.run.out.clone() };
        Ok(Pipeline { cfg, layout })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Runs one stage (or the whole chain) and refreshes the config snapshot.
    pub fn run(&self, stage: Stage) -> Result<()> {
        std::fs::create_dir_all(&self.layout.out).map_err(|e| Error::io(&self.layout.out, e))?;
        self.write_resolved_config()?;
        match stage {
            Stage::All => {
                if self.cfg.synth.is_some() {
                    self.run_stage(Stage::Synth)?;
                }
                for s in Stage::CHAIN {
                    self.run_stage(s)?;
                }
                Ok(())
            }
            s => self.run_stage(s),
        }
    }

    fn run_stage(&self, stage: Stage) -> Result<()> {
        log::info!("stage {}", stage.name());
        let started = std::time::Instant::now();
        match stage {
            Stage::Synth => self.synth(),
            Stage::Ingest => self.ingest(),
            Stage::Lexicon => self.lexicon(),
            Stage::Cohort => self.cohort(),
            Stage::Match => self.matching(),
            Stage::Its => self.its(),
            Stage::Sensitivity => self.sensitivity(),
            Stage::Analyze => self.analyze(),
            Stage::All => unreachable!("expanded by run"),
        }?;
        log::info!("stage {} done in {:.2?}", stage.name(), started.elapsed());
        Ok(())
    }

    fn write_resolved_config(&self) -> Result<()> {
        let text = toml::to_string(&self.cfg).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
        write_atomic(self.layout.resolved_config(), text.as_bytes())
    }

    /// An input file, pointing at `synth` when it should have produced it.
    fn input(&self, path: &Path) -> Result<PathBuf> {
        if path.exists() {
            return Ok(path.to_path_buf());
        }
        if self.cfg.synth.is_some() && path.starts_with(self.layout.dir(Stage::Synth)) {
            return Err(Error::MissingArtifact {
                path: path.to_path_buf(),
                stage: Stage::Synth.name(),
            });
        }
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found")))
    }

    fn synth(&self) -> Result<()> {
        let spec = self
            .cfg
            .synth
            .as_ref()
            .ok_or_else(|| Error::Config("the `synth` stage needs a [synth] section".into()))?;
        generate_cohort(spec, &self.layout.dir(Stage::Synth))?;
        Ok(())
    }

    fn ingest(&self) -> Result<()> {
        if self.cfg.run.inputs.is_empty() {
            return Err(Error::Config("`run.inputs` lists no dump files".into()));
        }
        let inputs = self
            .cfg
            .run
            .inputs
            .iter()
            .map(|p| self.input(p))
            .collect::<Result<Vec<_>>>()?;
        let mut corpus = ingest_posts(&inputs)?;
        let dir = self.layout.corpus_dir();
        corpus.save(&dir)?;
        let h = corpus.handle();
        if h.errors > 0 {
            log::warn!("{} malformed line(s) skipped", h.errors);
        }
        write_json(
            dir.join("ingest.json"),
            &IngestReport {
                inputs: &inputs,
                input_lines: h.input_lines,
                records: h.records,
                malformed: h.errors,
                authors: h.authors,
                subreddits: h.subreddits,
            },
        )
    }

    fn load_corpus(&self) -> Result<Corpus> {
        let dir = self.layout.corpus_dir();
        require(dir.join("meta.json"), Stage::Ingest)?;
        Corpus::load(&dir)
    }

    fn stopwords(&self) -> Result<Stopwords> {
        match &self.cfg.lexicon.stopwords {
            Some(p) => Stopwords::from_file(p),
            None => Ok(Stopwords::english()),
        }
    }

    fn lexicon(&self) -> Result<()> {
        let target = self.cfg.target()?;
        let lc = &self.cfg.lexicon;
        if lc.background.is_empty() {
            return Err(Error::Config("`lexicon.background` lists no background dump files".into()));
        }
        let corpus = self.load_corpus()?;
        let stopwords = self.stopwords()?;
        let target_counts = VocabCounts::from_posts(corpus.posts_in_subreddit(target), &stopwords);
        if target_counts.is_empty() {
            return Err(Error::InvalidInput(format!("subreddit `{target}` has no tokens in the corpus")));
        }
        let background_paths = lc.background.iter().map(|p| self.input(p)).collect::<Result<Vec<_>>>()?;
        let background = ingest_posts(&background_paths)?;
        let background_counts = VocabCounts::from_posts(background.posts(), &stopwords);
        let lambda = lc
            .lambda
            .or_else(|| (lc.lambda_scale != 1.0).then(|| lc.lambda_scale * (target_counts.total() as f64).sqrt()));
        let model = fit_sage(
            &target_counts,
            &background_counts,
            SageOptions {
                lambda,
                max_iter: lc.max_iter,
                tol: lc.tol,
            },
        )?;
        if !model.converged {
            log::warn!("SAGE stopped after {} iterations without converging", model.iterations);
        }
        let candidates = select_candidates(&model, lc.candidates);

        // Example posts per candidate, in corpus order.
        let wanted: BTreeSet<&str> = candidates.iter().map(|c| c.word.as_str()).collect();
        let mut contexts: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let per_word = lc.contexts.min(3);
        if per_word > 0 {
            for post in corpus.posts_in_subreddit(target) {
                for tok in tokens(&post.body, &stopwords) {
                    if !wanted.contains(tok.as_ref()) {
                        continue;
                    }
                    let slot = contexts.entry(tok.into_owned()).or_default();
                    if slot.len() < per_word && slot.last() != Some(&post.body) {
                        slot.push(post.body.clone());
                    }
                }
            }
        }

        let dir = self.layout.dir(Stage::Lexicon);
        write_json(
            dir.join("sage.json"),
            &SageReport {
                lambda: model.lambda,
                iterations: model.iterations,
                converged: model.converged,
                objective: model.objective,
                vocabulary: model.vocab.len(),
                target_tokens: target_counts.total(),
                background_tokens: background_counts.total(),
                nonzero: model.eta.iter().filter(|e| **e != 0.0).count(),
                candidates: &candidates,
            },
        )?;
        write_candidates_tsv(&dir.join("candidates.tsv"), &candidates, &contexts)?;
        match &lc.ratings {
            Some(path) => {
                let ratings = read_ratings(&self.input(path)?)?;
                let lexicon = apply_ratings(target, &candidates, &ratings)?;
                if lexicon.is_empty() {
                    log::warn!("no candidate reached the rating threshold; the lexicon is empty");
                }
                lexicon.write_tsv(&dir.join("lexicon.tsv"))
            }
            None => {
                log::warn!("`lexicon.ratings` is not set; rate candidates.tsv to build the lexicon");
                Ok(())
            }
        }
    }

    fn load_lexicon(&self) -> Result<HateLexicon> {
        let path = self.layout.file(Stage::Lexicon, "lexicon.tsv");
        if !path.exists() && self.cfg.lexicon.ratings.is_none() && self.layout.file(Stage::Lexicon, "candidates.tsv").exists() {
            return Err(Error::Config(
                "no lexicon: set `lexicon.ratings` to the rated candidates and rerun the `lexicon` stage".into(),
            ));
        }
        HateLexicon::read_tsv(&require(path, Stage::Lexicon)?, self.cfg.target()?)
    }

    fn banned(&self) -> Result<Option<BTreeSet<String>>> {
        match &self.cfg.analysis.banned {
            Some(p) => Ok(Some(read_lines(&self.input(p)?)?.into_iter().collect())),
            None => Ok(None),
        }
    }

    fn cohort(&self) -> Result<()> {
        let target = self.cfg.target()?;
        let cc = &self.cfg.cohort;
        let corpus = self.load_corpus()?;
        if corpus.subreddit_id(target).is_none() {
            return Err(Error::InvalidInput(format!("target subreddit `{target}` does not occur in the corpus")));
        }

        let confirmed = match &self.cfg.bots.confirmed {
            Some(p) => Some(read_lines(&self.input(p)?)?.into_iter().collect::<BTreeSet<String>>()),
            None => None,
        };
        let filter = filter_bots(corpus.authors().iter().map(String::as_str), &self.cfg.bots.keywords, confirmed.as_ref());
        let top_active = top_active_authors(&corpus, target, self.cfg.bots.top_active);
        let mut bots = filter.removed.clone();
        bots.extend(top_active.iter().cloned());

        let members = extract_members(&corpus, target, Some(&bots));
        let treatments = sample_treatments(&members, cc.treatment_cap, self.cfg.run.seed);
        let treatment_set: BTreeSet<String> = treatments.iter().cloned().collect();
        let ranked = rank_control_subreddits(
            &corpus,
            &treatment_set,
            target,
            cc.control_subreddits.max(cc.feature_subreddits),
        )?;
        let controls: Vec<String> = ranked.iter().take(cc.control_subreddits).map(|s| s.name.clone()).collect();
        let features: Vec<String> = ranked.iter().take(cc.feature_subreddits).map(|s| s.name.clone()).collect();
        let pool = build_control_pool(
            &corpus,
            &controls,
            &members,
            &bots,
            cc.cap_ratio,
            treatments.len(),
            self.cfg.run.seed,
        )?;

        let dir = self.layout.dir(Stage::Cohort);
        write_list(&dir.join("members.txt"), &members)?;
        write_json(
            dir.join("bots.json"),
            &BotsReport {
                filter: &filter,
                top_active: &top_active,
            },
        )?;
        write_list(&dir.join("treatments.txt"), &treatments)?;
        let mut csv = String::from("rank,subreddit,score,authors,treatment_authors\n");
        for (i, s) in ranked.iter().take(cc.control_subreddits).enumerate() {
            csv.push_str(&format!("{},{},{},{},{}\n", i + 1, s.name, s.score, s.authors, s.treatment_authors));
        }
        write_atomic(dir.join("control_subreddits.csv"), csv.as_bytes())?;
        write_list(&dir.join("feature_subreddits.txt"), &features)?;
        write_list(&dir.join("pool.txt"), &pool)
    }

    fn matching(&self) -> Result<()> {
        let target = self.cfg.target()?;
        let corpus = self.load_corpus()?;
        let list = |name: &str| read_lines(&require(self.layout.file(Stage::Cohort, name), Stage::Cohort)?);
        let treatments = list("treatments.txt")?;
        let pool = list("pool.txt")?;
        let features = list("feature_subreddits.txt")?;
        let days = activation_days(&corpus, target, &treatments);
        let space = FeatureSpace::new(&corpus, &features);
        let outcome = match_pairs(&corpus, &days, &pool, &space, self.cfg.run.seed)?;
        let dir = self.layout.dir(Stage::Match);
        write_pairs(&dir.join("pairs.tsv"), &outcome.pairs)?;
        write_feature_audit(&dir.join("features.csv"), &outcome.audit, &space)
    }

    fn measured(&self) -> Result<Measured> {
        let target = self.cfg.target()?;
        let pairs = read_pairs(&require(self.layout.file(Stage::Match, "pairs.tsv"), Stage::Match)?)?;
        if pairs.is_empty() {
            return Err(Error::InvalidInput("pairs.tsv holds no matched pairs".into()));
        }
        let lexicon = self.load_lexicon()?;
        let corpus = self.load_corpus()?;
        let stopwords = self.stopwords()?;
        let banned = self.banned()?;
        let ctx = ScopeContext::new(&corpus, target, banned.as_ref());
        let t: Vec<(String, Day)> = treatments_of(&pairs);
        let c: Vec<(String, Day)> = controls_of(&pairs);
        let treatments = cohort_tallies(&corpus, &t, &lexicon, &stopwords, &ctx);
        let controls = cohort_tallies(&corpus, &c, &lexicon, &stopwords, &ctx);
        Ok(Measured {
            corpus,
            pairs,
            treatments,
            controls,
            ctx,
            lexicon,
            stopwords,
        })
    }

    fn its_points(&self, m: &Measured) -> Result<(Vec<DailyPoint>, Vec<DailyPoint>)> {
        let scope = self.cfg.its.scope;
        if matches!(scope, Scope::Banned | Scope::NonBanned) && !m.ctx.has_banned_list() {
            return Err(Error::Config(format!("`its.scope = \"{scope}\"` needs `analysis.banned`")));
        }
        Ok((
            crate::analysis::cohort_points(&m.treatments, scope),
            crate::analysis::cohort_points(&m.controls, scope),
        ))
    }

    fn design_options(&self) -> DesignOptions {
        DesignOptions {
            granularity: self.cfg.its.granularity,
            weighting: self.cfg.its.weighting,
        }
    }

    fn its(&self) -> Result<()> {
        let m = self.measured()?;
        let (tp, cp) = self.its_points(&m)?;
        let ic = &self.cfg.its;
        let dir = self.layout.dir(Stage::Its);
        let treated_means = group_daily_means(&tp);
        let control_means = group_daily_means(&cp);

        let (bandwidth, source) = match ic.bandwidth {
            Some(b) => (b, "fixed"),
            None => {
                let pre: BTreeMap<i64, f64> = treated_means
                    .iter()
                    .filter(|(d, _)| **d < 0)
                    .map(|(d, (mean, _))| (*d, *mean))
                    .collect();
                let search: BandwidthSearch = cv_bandwidth(&pre, &ic.bandwidths(), ic.cv_rounds)?;
                let mut csv = String::from("bandwidth,rmse,selected\n");
                for (b, r) in search.candidates.iter().zip(&search.rmse) {
                    csv.push_str(&format!("{b},{r},{}\n", u8::from(*b == search.selected)));
                }
                write_atomic(dir.join("cv.csv"), csv.as_bytes())?;
                (search.selected, "cross-validation")
            }
        };

        let design = build_design(&tp, &cp, bandwidth, self.design_options())?;
        let fit = fit_ols(&design)?;
        write_fit_json(&dir.join("fit.json"), &fit)?;
        write_plot_lines_csv(&dir.join("plot_lines.csv"), &fit)?;
        write_daily_means_csv(
            &dir.join("daily_means.csv"),
            &[("treatment", &treated_means), ("control", &control_means)],
        )?;
        let coefs = fit.coefficients.to_array();
        write_json(
            dir.join("summary.json"),
            &ItsSummary {
                pairs: m.pairs.len(),
                scope: ic.scope,
                granularity: ic.granularity,
                weighting: ic.weighting,
                bandwidth,
                bandwidth_source: source,
                treatment_points: tp.len(),
                control_points: cp.len(),
                relative_increase_pct: fit.relative_increase().ok(),
                coefficients: COLUMN_NAMES.iter().copied().zip(coefs).collect(),
            },
        )
    }

    fn sensitivity(&self) -> Result<()> {
        let m = self.measured()?;
        let (tp, cp) = self.its_points(&m)?;
        let table = sensitivity_sweep(&tp, &cp, &self.cfg.its.bandwidths(), self.design_options());
        let dir = self.layout.dir(Stage::Sensitivity);
        write_sweep_csv(&dir.join("sweep.csv"), &table, self.cfg.its.confidence)?;
        let mut failures = String::from("bandwidth\treason\n");
        for (b, why) in table.failures() {
            log::warn!("bandwidth {b} skipped: {why}");
            failures.push_str(&format!("{b}\t{}\n", crate::fsutil::tsv_cell(why)));
        }
        write_atomic(dir.join("failures.tsv"), failures.as_bytes())
    }

    fn analyze(&self) -> Result<()> {
        let m = self.measured()?;
        let ac = &self.cfg.analysis;
        let dir = self.layout.dir(Stage::Analyze);
        write_context_csv(&dir.join("context_series.csv"), &context_series(&m.treatments, &m.controls, &m.ctx))?;
        write_lifespan_csv(
            &dir.join("lifespan.csv"),
            &lifespan_split(&m.corpus, &m.treatments, ac.lifespan_scope, ac.lifespan_days),
        )?;
        let t = treatments_of(&m.pairs);
        let dist = |scope| word_distribution(&m.corpus, &t, &m.lexicon, &m.stopwords, &m.ctx, scope);
        let inside = dist(Scope::Inside)?;
        let outside = dist(Scope::Outside)?;
        write_word_freq_csv(&dir.join("word_freq.csv"), &[inside.clone(), outside.clone()])?;
        let r = compare_distributions(&inside, &outside)?;
        write_spearman_json(&dir.join("spearman.json"), &SpearmanReport::new(Scope::Inside, Scope::Outside, r))
    }
}
