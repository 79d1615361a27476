use std::path::PathBuf;

use clap::{ArgGroup, Parser, Subcommand};

/// Deterministic dataset curation for reasoning-tuning corpora.
#[derive(Debug, Parser)]
#[command(name = "curate", version, max_term_width = 100)]
pub struct Cli {
    /// Run configuration (TOML). Built-in defaults apply when omitted;
    /// CURATE_ENDPOINT and CURATE_API_KEY override the endpoint settings
    /// either way.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Run seed override; wins over the config file.
    #[arg(long, global = true, value_name = "SEED")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score each record's difficulty with n stochastic rollouts.
    Score(ScoreArgs),
    /// Keep records whose rollout pass count falls inside the band.
    Filter(FilterArgs),
    /// Embed record questions and write the embedding sidecar.
    Embed(EmbedArgs),
    /// Project cached embeddings onto principal components.
    Pca(PcaArgs),
    /// Fit a k-means model over cached embeddings.
    Cluster(ClusterArgs),
    /// Split the budget across clusters by sqrt-size Dirichlet weights.
    Allocate(AllocateArgs),
    /// kNN label coverage of query records against a corpus.
    Coverage(CoverageArgs),
    /// Rebalance the category distribution by downsampling.
    Balance(BalanceArgs),
    /// Combine datasets at controlled ratios.
    Mix(MixArgs),
    /// Dedup, length-filter, and budget the final dataset.
    Assemble(AssembleArgs),
    /// Rewrite reasoning traces, keeping only answer-preserving rewrites.
    Rewrite(RewriteArgs),
    /// Aggregate per-seed scores into a summary table and chart.
    Report(ReportArgs),
}

#[derive(Debug, clap::Args)]
pub struct ScoreArgs {
    /// JSONL dataset to score; the sidecar lands next to it.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Score a seeded uniform sample of this many records instead of all.
    #[arg(long, value_name = "N")]
    pub sample: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct FilterArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Filtered dataset destination.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Band lower edge (defaults to the config band).
    #[arg(long, value_name = "K")]
    pub k_min: Option<u32>,
    /// Band upper edge (defaults to the config band).
    #[arg(long, value_name = "K")]
    pub k_max: Option<u32>,
    /// After filtering, keep a seeded uniform sample of this size.
    #[arg(long, value_name = "N")]
    pub sample: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct EmbedArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct PcaArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// id,pc1,pc2,source table destination.
    #[arg(long, value_name = "FILE")]
    pub out_csv: PathBuf,
    /// Optional scatter chart, colored by source.
    #[arg(long, value_name = "FILE")]
    pub out_svg: Option<PathBuf>,
    /// Number of principal components to keep.
    #[arg(long, default_value_t = 2, value_name = "N")]
    pub components: usize,
}

#[derive(Debug, clap::Args)]
pub struct ClusterArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Cluster model destination (JSON).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Cluster count (defaults to the config cluster_count).
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct AllocateArgs {
    /// Cluster model produced by `curate cluster`.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Allocation plan destination (JSON).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Budget override (defaults to the config budget).
    #[arg(long, value_name = "N")]
    pub budget: Option<usize>,
    /// Concentration override; `inf` selects the deterministic weights.
    #[arg(long, value_name = "TAU")]
    pub tau: Option<f64>,
    /// Dataset the model was fit on; with --out-data, also materialize the
    /// allocated sample.
    #[arg(long, value_name = "FILE", requires = "out_data")]
    pub data: Option<PathBuf>,
    /// Sampled dataset destination.
    #[arg(long, value_name = "FILE", requires = "data")]
    pub out_data: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct CoverageArgs {
    /// Query dataset (needs an embedding sidecar).
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Corpus dataset (needs an embedding sidecar).
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Corpus records from this source count as covered.
    #[arg(long, value_name = "SOURCE")]
    pub label_source: String,
    /// id,coverage,bin table destination.
    #[arg(long, value_name = "FILE")]
    pub out_csv: PathBuf,
    /// Optional per-bin summary table.
    #[arg(long, value_name = "FILE")]
    pub out_bins: Option<PathBuf>,
    /// Optional bin-count histogram.
    #[arg(long, value_name = "FILE")]
    pub out_svg: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["total", "cap"])))]
pub struct BalanceArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Spread this many records as evenly as category sizes allow.
    #[arg(long, value_name = "N")]
    pub total: Option<usize>,
    /// Keep at most this many records per category.
    #[arg(long, value_name = "N")]
    pub cap: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct MixArgs {
    /// Component dataset; repeat once per component.
    #[arg(long = "input", value_name = "FILE", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Mixing ratio for the --input at the same position.
    #[arg(long = "ratio", value_name = "R", required = true)]
    pub ratios: Vec<f64>,
    /// Total records in the mixture.
    #[arg(long, value_name = "N")]
    pub total: usize,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct AssembleArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Final dataset destination; the audit JSON and source chart land next
    /// to it.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Budget override (defaults to the config budget).
    #[arg(long, value_name = "N")]
    pub budget: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct RewriteArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// CSV of per-seed scores with header `label,score`.
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,
    /// label,mean,std,min,max table destination.
    #[arg(long, value_name = "FILE")]
    pub out_csv: PathBuf,
    /// Optional mean/std chart.
    #[arg(long, value_name = "FILE")]
    pub out_svg: Option<PathBuf>,
}
