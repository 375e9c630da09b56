use std::path::PathBuf;
use std::sync::LazyLock;

use clap::{Args, Parser, Subcommand, ValueEnum};

use concept_realm::modelselect::CoherenceMeasure;
use concept_realm::realm::Windowing;
use concept_realm::FORMAT_VERSION;

static VERSION: LazyLock<String> = LazyLock::new(|| {
    format!(
        "{} (model format {FORMAT_VERSION}, realm format {FORMAT_VERSION}, manifest format {FORMAT_VERSION}, export format jsonl)",
        env!("CARGO_PKG_VERSION")
    )
});

#[derive(Debug, Parser)]
#[command(name = "concept-realm", version = VERSION.as_str(), about = "Concept realms from issue-tracker exports")]
pub struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse exports, preprocess text and build each project's vocabulary.
    Ingest(StageArgs),
    /// Score every K in the configured range and record the best.
    SelectK(StageArgs),
    /// Train each project's topic model.
    Train(StageArgs),
    /// Infer concept weights for every issue and comment.
    Realm(StageArgs),
    /// Run all analyses and write per-project CSVs.
    Analyze(StageArgs),
    /// Write cross-project summaries, plot data and the manifest.
    Report(StageArgs),
    /// Run every stage in order.
    Pipeline(StageArgs),
    /// Generate synthetic fixtures.
    Synth(SynthArgs),
}

/// Settings shared by the pipeline stages. Each flag overrides the config
/// file entry of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct StageArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Export files (JSON Lines).
    #[arg(long, value_name = "FILE", num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub lemmas: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub aliases: Option<PathBuf>,
    #[arg(long)]
    pub no_below: Option<usize>,
    #[arg(long)]
    pub no_above: Option<f64>,
    /// Build vocabularies and train on issues only.
    #[arg(long)]
    pub issues_only: bool,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Fixed K; skips the selected value.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub sample_lag: Option<usize>,
    #[arg(long)]
    pub fold_in_iterations: Option<usize>,
    #[arg(long)]
    pub coherence_window: Option<usize>,
    #[arg(long, value_enum)]
    pub coherence: Option<CoherenceArg>,
    /// Replace raw counts with rounded TF-IDF weights.
    #[arg(long)]
    pub tfidf_pseudocounts: bool,
    #[arg(long, value_enum)]
    pub windowing: Option<WindowingArg>,
    #[arg(long)]
    pub keeper_threshold: Option<f64>,
    #[arg(long)]
    pub leaver_ratio: Option<f64>,
    #[arg(long)]
    pub split_margin: Option<f64>,
    #[arg(long)]
    pub entropy_top: Option<usize>,
    /// Alignment counts a hit when the assignee ranks within the top N.
    #[arg(long)]
    pub top_n: Option<usize>,
    #[arg(long)]
    pub alignment_year: Option<i32>,
    #[arg(long)]
    pub min_issues_per_half: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowingArg {
    Yearly,
    Quarterly,
}

impl From<WindowingArg> for Windowing {
    fn from(w: WindowingArg) -> Self {
        match w {
            WindowingArg::Yearly => Windowing::Yearly,
            WindowingArg::Quarterly => Windowing::Quarterly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoherenceArg {
    /// Mean pairwise NPMI.
    Npmi,
    /// Indirect cosine over NPMI context vectors.
    Cv,
}

impl From<CoherenceArg> for CoherenceMeasure {
    fn from(c: CoherenceArg) -> Self {
        match c {
            CoherenceArg::Npmi => CoherenceMeasure::Npmi,
            CoherenceArg::Cv => CoherenceMeasure::Cv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Single-topic documents over disjoint pseudo-word supports.
    Topics,
    /// A project with topic owners, generalists and an optional leaver.
    Project,
    /// Quarterly comment-count traces with planted departures.
    Traces,
    /// A concept realm with planted developer shares of the top concept.
    Keepers,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "topics")]
    pub scenario: Scenario,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub topics: usize,
    #[arg(long, default_value_t = 200)]
    pub documents: usize,
    #[arg(long, default_value_t = 50)]
    pub tokens: usize,
    #[arg(long, default_value_t = 10)]
    pub terms_per_topic: usize,
    #[arg(long, default_value = "SYN")]
    pub project_key: String,
    #[arg(long, default_value_t = 2010)]
    pub start_year: i32,
    #[arg(long, default_value_t = 4)]
    pub years: usize,
    #[arg(long, default_value_t = 12)]
    pub issues_per_quarter: usize,
    #[arg(long, default_value_t = 2)]
    pub generalists: usize,
    /// Owner of this topic leaves at `--leaver-quarter`.
    #[arg(long, requires = "leaver_quarter")]
    pub leaver_topic: Option<usize>,
    /// Quarter index, counted from the project start.
    #[arg(long, requires = "leaver_topic")]
    pub leaver_quarter: Option<usize>,
    /// A new owner takes over the leaver's topic.
    #[arg(long)]
    pub successor: bool,
    /// Developer shares of the top concept (keepers scenario).
    #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.2, 0.1, 0.1])]
    pub shares: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub with_departure: usize,
    #[arg(long, default_value_t = 50)]
    pub without_departure: usize,
    #[arg(long, default_value_t = 16)]
    pub quarters: usize,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Ground truth as JSON.
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
}
