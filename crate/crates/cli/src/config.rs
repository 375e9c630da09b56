//! Run configuration: a TOML file whose entries can be overridden by flags.
//!
//! ```toml
//! input = ["export.jsonl"]
//! output = "out"
//! seed = 42
//!
//! [vocabulary]
//! no_below = 15
//! no_above = 0.5
//!
//! [model]
//! k_min = 1
//! k_max = 20
//!
//! [analysis]
//! keeper_threshold = 0.5
//! ```
//!
//! Relative paths in the file are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use concept_realm::analytics::{AnalyticsConfig, DEFAULT_ENTROPY_TOP, DEFAULT_KEEPER_THRESHOLD, DEFAULT_LEAVER_RATIO, DEFAULT_SPLIT_MARGIN};
use concept_realm::corpus::VocabularyOptions;
use concept_realm::modelselect::{CoherenceMeasure, DEFAULT_WINDOW};
use concept_realm::realm::{Windowing, DEFAULT_FOLD_IN_ITERATIONS};
use concept_realm::topicmodel::TrainConfig;

use crate::args::StageArgs;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabularySection {
    pub no_below: usize,
    pub no_above: f64,
    pub issues_only: bool,
}

impl Default for VocabularySection {
    fn default() -> Self {
        let d = VocabularyOptions::default();
        VocabularySection {
            no_below: d.no_below,
            no_above: d.no_above,
            issues_only: d.issues_only,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub k_min: usize,
    pub k_max: usize,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub sample_lag: usize,
    pub fold_in_iterations: usize,
    pub coherence_window: usize,
    pub coherence: CoherenceMeasure,
    pub tfidf_pseudocounts: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::new(1, 0);
        ModelSection {
            k_min: 1,
            k_max: 20,
            k: None,
            alpha: None,
            beta: t.beta,
            iterations: t.iterations,
            burn_in: t.burn_in,
            sample_lag: t.sample_lag,
            fold_in_iterations: DEFAULT_FOLD_IN_ITERATIONS,
            coherence_window: DEFAULT_WINDOW,
            coherence: CoherenceMeasure::Npmi,
            tfidf_pseudocounts: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RealmSection {
    pub windowing: Windowing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub keeper_threshold: f64,
    pub leaver_ratio: f64,
    pub split_margin: f64,
    pub entropy_top: usize,
    pub top_n: usize,
    pub alignment_year: Option<i32>,
    pub min_issues_per_half: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            keeper_threshold: DEFAULT_KEEPER_THRESHOLD,
            leaver_ratio: DEFAULT_LEAVER_RATIO,
            split_margin: DEFAULT_SPLIT_MARGIN,
            entropy_top: DEFAULT_ENTROPY_TOP,
            top_n: 1,
            alignment_year: None,
            min_issues_per_half: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Vec<PathBuf>,
    pub output: PathBuf,
    /// Required; nothing is ever seeded from the clock.
    pub seed: Option<u64>,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub vocabulary: VocabularySection,
    pub model: ModelSection,
    pub realm: RealmSection,
    pub analysis: AnalysisSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: Vec::new(),
            output: PathBuf::from("out"),
            seed: None,
            stopwords: None,
            lemmas: None,
            aliases: None,
            vocabulary: VocabularySection::default(),
            model: ModelSection::default(),
            realm: RealmSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

fn data_error(e: concept_realm::Error) -> CliError {
    CliError::Data(e)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// Reads a config file and anchors its relative paths at the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| data_error(concept_realm::Error::io(path, e)))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.input.iter_mut().for_each(anchor);
        anchor(&mut cfg.output);
        for p in [&mut cfg.stopwords, &mut cfg.lemmas, &mut cfg.aliases].into_iter().flatten() {
            anchor(p);
        }
        Ok(cfg)
    }

    /// Config file (if any) with flags applied on top, validated.
    pub fn resolve(args: &StageArgs) -> Result<Self, CliError> {
        let mut cfg = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(args);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, a: &StageArgs) {
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        if !a.input.is_empty() {
            self.input = a.input.clone();
        }
        set(&mut self.output, &a.out);
        if a.seed.is_some() {
            self.seed = a.seed;
        }
        if a.stopwords.is_some() {
            self.stopwords = a.stopwords.clone();
        }
        if a.lemmas.is_some() {
            self.lemmas = a.lemmas.clone();
        }
        if a.aliases.is_some() {
            self.aliases = a.aliases.clone();
        }
        set(&mut self.vocabulary.no_below, &a.no_below);
        set(&mut self.vocabulary.no_above, &a.no_above);
        self.vocabulary.issues_only |= a.issues_only;
        set(&mut self.model.k_min, &a.k_min);
        set(&mut self.model.k_max, &a.k_max);
        if a.k.is_some() {
            self.model.k = a.k;
        }
        if a.alpha.is_some() {
            self.model.alpha = a.alpha;
        }
        set(&mut self.model.beta, &a.beta);
        set(&mut self.model.iterations, &a.iterations);
        set(&mut self.model.burn_in, &a.burn_in);
        set(&mut self.model.sample_lag, &a.sample_lag);
        set(&mut self.model.fold_in_iterations, &a.fold_in_iterations);
        set(&mut self.model.coherence_window, &a.coherence_window);
        if let Some(m) = a.coherence {
            self.model.coherence = m.into();
        }
        self.model.tfidf_pseudocounts |= a.tfidf_pseudocounts;
        if let Some(w) = a.windowing {
            self.realm.windowing = w.into();
        }
        set(&mut self.analysis.keeper_threshold, &a.keeper_threshold);
        set(&mut self.analysis.leaver_ratio, &a.leaver_ratio);
        set(&mut self.analysis.split_margin, &a.split_margin);
        set(&mut self.analysis.entropy_top, &a.entropy_top);
        set(&mut self.analysis.top_n, &a.top_n);
        if a.alignment_year.is_some() {
            self.analysis.alignment_year = a.alignment_year;
        }
        set(&mut self.analysis.min_issues_per_half, &a.min_issues_per_half);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.seed.is_none() {
            return bad("a seed is required: set `seed` in the config or pass --seed".into());
        }
        let v = &self.vocabulary;
        if !(v.no_above > 0.0 && v.no_above <= 1.0) {
            return bad(format!("no_above must be in (0, 1], got {}", v.no_above));
        }
        let m = &self.model;
        if m.k_min == 0 || m.k_min > m.k_max {
            return bad(format!("invalid K range {}..={}", m.k_min, m.k_max));
        }
        if m.k == Some(0) {
            return bad("k must be positive".into());
        }
        if m.alpha.is_some_and(|a| !(a > 0.0)) || !(m.beta > 0.0) {
            return bad("alpha and beta must be positive".into());
        }
        if m.iterations == 0 || m.burn_in >= m.iterations || m.sample_lag == 0 {
            return bad("iterations must exceed burn_in and sample_lag must be positive".into());
        }
        if m.fold_in_iterations == 0 || m.coherence_window == 0 {
            return bad("fold_in_iterations and coherence_window must be positive".into());
        }
        self.analytics().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.analysis.top_n == 0 {
            return bad("top_n must be at least 1".into());
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated")
    }

    pub fn vocabulary_options(&self) -> VocabularyOptions {
        VocabularyOptions {
            no_below: self.vocabulary.no_below,
            no_above: self.vocabulary.no_above,
            issues_only: self.vocabulary.issues_only,
        }
    }

    pub fn train_config(&self, k: usize) -> TrainConfig {
        TrainConfig {
            k,
            alpha: self.model.alpha,
            beta: self.model.beta,
            iterations: self.model.iterations,
            burn_in: self.model.burn_in,
            sample_lag: self.model.sample_lag,
            seed: self.seed(),
        }
    }

    pub fn analytics(&self) -> AnalyticsConfig {
        AnalyticsConfig {
            keeper_threshold: self.analysis.keeper_threshold,
            leaver_ratio: self.analysis.leaver_ratio,
            split_margin: self.analysis.split_margin,
            entropy_top: self.analysis.entropy_top,
        }
    }
}
