use std::path::PathBuf;

use catrank::coherence::{Criterion, MembershipProbability, RelationCounting};
use catrank::data::FeatureKind;
use catrank::eval::{Fallback, DEFAULT_EXACT_LIMIT};
use catrank::grid::ClosenessStrategy;
use catrank::metrics::MetricKind;
use catrank::neighbors::{DEFAULT_EXACT_LIMIT as CALIBRATION_EXACT_LIMIT, DEFAULT_SAMPLE_PAIRS};
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "catrank", version, about = "Rank entity-graph categories by descriptive power")]
pub struct Cli {
    /// Worker threads for parallel stages; 1 makes every stage bitwise
    /// deterministic.
    #[arg(long, global = true, env = "CATRANK_WORKERS", value_parser = positive)]
    pub workers: Option<usize>,

    /// `key = value` file of long flags; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log verbosity (repeat for more).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate raw inputs into JSON intermediates.
    Ingest(IngestArgs),
    /// Generate truncated random walks over the graph.
    Walk(WalkArgs),
    /// Train skip-gram entity embeddings from walks.
    Embed(EmbedArgs),
    /// Compute close-neighbor lists.
    Knn(KnnArgs),
    /// Score every category by conductance and surprise.
    Coherence(ScoreArgs),
    /// Rank categories under one criterion.
    Rank(RankArgs),
    /// Run the feature x metric x closeness x criterion grid.
    Grid(GridArgs),
    /// Evaluate a ranking against preference votes.
    Evaluate(EvaluateArgs),
    /// Descriptive statistics and tables.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Walk(_) => "walk",
            Command::Embed(_) => "embed",
            Command::Knn(_) => "knn",
            Command::Coherence(_) => "coherence",
            Command::Rank(_) => "rank",
            Command::Grid(_) => "grid",
            Command::Evaluate(_) => "evaluate",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Edge list, `src<TAB>dst` per line.
    #[arg(long)]
    pub graph: PathBuf,
    /// `entity<TAB>category` per line.
    #[arg(long)]
    pub categories: Option<PathBuf>,
    /// Feature file (text, or `.bin` with `.idx` sidecar).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Required kind of the feature file.
    #[arg(long)]
    pub feature_kind: Option<FeatureKind>,
    /// Add the reverse of every edge.
    #[arg(long)]
    pub symmetrize: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct WalkParams {
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub walks_per_vertex: usize,
    #[arg(long, default_value_t = 40, value_parser = positive)]
    pub walk_length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct WalkArgs {
    /// Edge list TSV or `graph.json` from ingest.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub symmetrize: bool,
    #[command(flatten)]
    pub walk: WalkParams,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub symmetrize: bool,
    /// Walk corpus from `walk`; generated on the fly when absent.
    #[arg(long)]
    pub walks: Option<PathBuf>,
    #[command(flatten)]
    pub walk: WalkParams,
    #[arg(long, default_value_t = 128, value_parser = positive)]
    pub dim: usize,
    #[arg(long, default_value_t = 5, value_parser = positive)]
    pub window: usize,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025, value_parser = positive_f64)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.0001)]
    pub final_learning_rate: f64,
    /// Negative samples per pair; 0 trains hierarchical softmax.
    #[arg(long, default_value_t = 0)]
    pub negatives: usize,
    /// Output features; `.bin` writes binary, anything else text.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("closeness").required(true).args(["k", "avg_neighbors", "threshold"])))]
pub struct KnnArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = MetricKind::Cosine)]
    pub metric: MetricKind,
    /// Keep the k nearest others of every entity.
    #[arg(long, value_parser = positive)]
    pub k: Option<usize>,
    /// Calibrate a distance threshold to this mean neighbor count.
    #[arg(long, value_parser = positive_f64)]
    pub avg_neighbors: Option<f64>,
    /// Explicit distance threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub calibration: CalibrationParams,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrationParams {
    /// Above this many entities thresholds come from sampled pairs.
    #[arg(long, default_value_t = CALIBRATION_EXACT_LIMIT)]
    pub calibration_exact_limit: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_PAIRS, value_parser = positive)]
    pub sample_pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoringParams {
    #[arg(long, default_value_t = 2)]
    pub min_size: usize,
    /// `proportional` (|cat|/N) or `excluding_self` ((|cat|-1)/(N-1)).
    #[arg(long, default_value = "proportional")]
    pub probability: MembershipProbability,
    /// `pairs` or `directed` relation counting for conductance.
    #[arg(long, default_value = "pairs")]
    pub counting: RelationCounting,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    /// Neighbor TSV from `knn`.
    #[arg(long)]
    pub neighbors: PathBuf,
    /// Category TSV or `categories.json` from ingest.
    #[arg(long)]
    pub categories: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringParams,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    #[arg(long)]
    pub neighbors: PathBuf,
    #[arg(long)]
    pub categories: PathBuf,
    #[arg(long, default_value_t = Criterion::Surprise)]
    pub criterion: Criterion,
    #[command(flatten)]
    pub scoring: ScoringParams,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CheatingParams {
    /// Largest vote-category count solved exactly.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    pub exact_limit: usize,
    /// Placement of categories missing from a ranking.
    #[arg(long, default_value = "index")]
    pub fallback: Fallback,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Ingested features.
    #[arg(long, required_unless_present = "embedding")]
    pub features: Option<PathBuf>,
    /// Trained embedding features.
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    #[arg(long)]
    pub categories: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "l1,l2,cosine,kl,js")]
    pub metrics: Vec<MetricKind>,
    /// Neighbor counts (or target mean counts for distance closeness).
    #[arg(long, value_delimiter = ',', default_value = "5,10,25,50,100", value_parser = positive)]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "count")]
    pub closeness: Vec<ClosenessStrategy>,
    #[arg(long, value_delimiter = ',', default_value = "conductance,surprise")]
    pub criteria: Vec<Criterion>,
    #[arg(long)]
    pub votes: Option<PathBuf>,
    #[command(flatten)]
    pub cheating: CheatingParams,
    #[command(flatten)]
    pub calibration: CalibrationParams,
    #[command(flatten)]
    pub scoring: ScoringParams,
    /// Also write every configuration's ranking CSV.
    #[arg(long)]
    pub write_rankings: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Ranking CSV from `rank` or `grid`.
    #[arg(long)]
    pub ranking: PathBuf,
    /// Vote CSV: `question,choice1..choiceM,voted` (voted is 1-based).
    #[arg(long)]
    pub votes: PathBuf,
    /// Restrict categories to this file's universe; unknown vote
    /// categories are then errors.
    #[arg(long)]
    pub categories: Option<PathBuf>,
    #[command(flatten)]
    pub cheating: CheatingParams,
    /// Number of confusing category pairs to list.
    #[arg(long, default_value_t = 10)]
    pub confusing: usize,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub categories: Option<PathBuf>,
    /// Entity universe for the category file; otherwise taken from it.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Entity names, one per line, for subset membership statistics.
    #[arg(long)]
    pub subset: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub bucket_width: usize,
    /// Features for the distance-quantile table.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, default_value_t = MetricKind::L2)]
    pub metric: MetricKind,
    #[arg(long, value_delimiter = ',', default_value = "5,10,25,50,100", value_parser = positive_f64)]
    pub targets: Vec<f64>,
    #[command(flatten)]
    pub calibration: CalibrationParams,
    /// Ranking CSV for the top-N table.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    #[arg(long, default_value_t = 100, value_parser = positive)]
    pub top: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}
