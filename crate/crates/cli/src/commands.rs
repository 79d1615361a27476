use std::collections::BTreeMap;
use std::path::Path;

use curate_core::analytics::{self, kmeans, knn_coverage, KmeansParams};
use curate_core::config::{ConfigError, CurationConfig};
use curate_core::dataset::{self, DataError, Dataset};
use curate_core::difficulty::{self, DifficultyError, ScoreParams};
use curate_core::gateway::http::HttpGateway;
use curate_core::gateway::{self, DecodeParams, GatewayError};
use curate_core::record::DifficultyBand;
use curate_core::report::{self, fmt_sig};
use curate_core::select::{self, BalanceMode};
use curate_core::stats::{aggregate_seeds, RunStats};
use curate_core::{plan, ClusterModel, EmbeddingMatrix};

use crate::args;

/// Process-level failure classes; the numeric exit code is the contract.
#[derive(Debug)]
pub enum AppError {
    /// Bad invocation: exit 1.
    Usage(String),
    /// Unreadable or inconsistent data: exit 2.
    Data(String),
    /// The model endpoint failed: exit 3.
    Endpoint(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
            AppError::Endpoint(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Data(m) | AppError::Endpoint(m) => m,
        }
    }
}

impl From<GatewayError> for AppError {
    fn from(e: GatewayError) -> Self {
        if e.is_endpoint_failure() {
            AppError::Endpoint(e.to_string())
        } else {
            AppError::Data(e.to_string())
        }
    }
}

impl From<DifficultyError> for AppError {
    fn from(e: DifficultyError) -> Self {
        match e {
            DifficultyError::Gateway(g) => g.into(),
            other => AppError::Data(other.to_string()),
        }
    }
}

macro_rules! data_errors {
    ($($ty:ty),*) => {$(
        impl From<$ty> for AppError {
            fn from(e: $ty) -> Self {
                AppError::Data(e.to_string())
            }
        }
    )*};
}
data_errors!(
    DataError,
    ConfigError,
    analytics::AnalyticsError,
    plan::PlanError,
    select::SelectError,
    report::ReportError
);

pub fn load_config(path: Option<&Path>) -> Result<CurationConfig, AppError> {
    match path {
        Some(p) => Ok(CurationConfig::load(p)?),
        None => {
            let mut cfg = CurationConfig::default();
            cfg.apply_env_overrides();
            Ok(cfg)
        }
    }
}

pub fn dispatch(command: &args::Command, cfg: &CurationConfig) -> Result<(), AppError> {
    match command {
        args::Command::Score(a) => score(cfg, a),
        args::Command::Filter(a) => filter(cfg, a),
        args::Command::Embed(a) => embed(cfg, a),
        args::Command::Pca(a) => pca(cfg, a),
        args::Command::Cluster(a) => cluster(cfg, a),
        args::Command::Allocate(a) => allocate(cfg, a),
        args::Command::Coverage(a) => coverage(cfg, a),
        args::Command::Balance(a) => balance(cfg, a),
        args::Command::Mix(a) => mix(cfg, a),
        args::Command::Assemble(a) => assemble(cfg, a),
        args::Command::Rewrite(a) => rewrite(cfg, a),
        args::Command::Report(a) => report_cmd(cfg, a),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
}

/// Reads the embedding sidecar for a dataset and checks it still matches the
/// records (same ids, same order).
fn matrix_for(ds: &Dataset, data_path: &Path) -> Result<EmbeddingMatrix, AppError> {
    let cache = analytics::cache_path(data_path);
    if !cache.exists() {
        return Err(AppError::Data(format!(
            "embedding sidecar not found: {} (run `curate embed --data {}` first)",
            cache.display(),
            data_path.display()
        )));
    }
    let matrix = EmbeddingMatrix::read_cache(&cache)?;
    let ids = ds.ids();
    if matrix.ids().len() != ids.len()
        || matrix.ids().iter().zip(&ids).any(|(a, b)| a != b)
    {
        return Err(AppError::Data(format!(
            "{}: embedding sidecar does not match the dataset records; re-run `curate embed`",
            cache.display()
        )));
    }
    Ok(matrix)
}

fn score(cfg: &CurationConfig, a: &args::ScoreArgs) -> Result<(), AppError> {
    let ds = dataset::ingest(&a.data)?;
    let ds = match a.sample {
        Some(m) => difficulty::sample_uniform(&ds, m, cfg.seed)?,
        None => ds,
    };
    let gw = HttpGateway::from_config(cfg)?;
    let params = ScoreParams::from_config(cfg);
    let sidecar = difficulty::sidecar_path(&a.data);
    let table = difficulty::score_dataset(&ds, &gw, &params, &sidecar)?;
    let mut by_k: BTreeMap<u32, usize> = BTreeMap::new();
    for p in table.profiles.values() {
        *by_k.entry(p.k).or_default() += 1;
    }
    let histogram: Vec<String> = by_k.iter().map(|(k, n)| format!("{k}:{n}")).collect();
    println!(
        "scored {} records (k {}) -> {}",
        table.profiles.len(),
        histogram.join(" "),
        sidecar.display()
    );
    Ok(())
}

fn filter(cfg: &CurationConfig, a: &args::FilterArgs) -> Result<(), AppError> {
    let ds = dataset::ingest(&a.data)?;
    let sidecar = difficulty::sidecar_path(&a.data);
    if !sidecar.exists() {
        return Err(AppError::Data(format!(
            "difficulty sidecar not found: {} (run `curate score --data {}` first)",
            sidecar.display(),
            a.data.display()
        )));
    }
    let params = ScoreParams::from_config(cfg);
    let table = difficulty::load_table(&sidecar, &params)?;
    let band = DifficultyBand::new(
        a.k_min.unwrap_or(cfg.band_k_min),
        a.k_max.unwrap_or(cfg.band_k_max),
    )
    .map_err(|e| AppError::Usage(e.to_string()))?;
    let kept = difficulty::filter_band(&ds, &table, band)?;
    let kept = match a.sample {
        Some(m) => difficulty::sample_uniform(&kept, m, cfg.seed)?,
        None => kept,
    };
    dataset::export(&kept, &a.out)?;
    println!(
        "kept {} of {} records (band [{}, {}]) -> {}",
        kept.len(),
        ds.len(),
        band.k_min,
        band.k_max,
        a.out.display()
    );
    Ok(())
}

fn embed(cfg: &CurationConfig, a: &args::EmbedArgs) -> Result<(), AppError> {
    let ds = dataset::ingest(&a.data)?;
    let gw = HttpGateway::from_config(cfg)?;
    let matrix =
        gateway::embed_batch(&gw, &cfg.embedding_model, &ds.records, |r| r.question.clone())?;
    let cache = analytics::cache_path(&a.data);
    matrix.write_cache(&cache)?;
    println!(
        "embedded {} records at dim {} -> {}",
        matrix.nrows(),
        matrix.dim(),
        cache.display()
    );
    Ok(())
}

fn pca(cfg: &CurationConfig, a: &args::PcaArgs) -> Result<(), AppError> {
    let _ = cfg;
    let ds = dataset::ingest(&a.data)?;
    let matrix = matrix_for(&ds, &a.data)?;
    let out = analytics::pca_project(&matrix, a.components)?;
    let sources: Vec<String> = ds.records.iter().map(|r| r.source.clone()).collect();
    report::write_pca_csv(&a.out_csv, matrix.ids(), &out.projections, &sources)?;
    if let Some(svg_path) = &a.out_svg {
        let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for (proj, source) in out.projections.iter().zip(&sources) {
            series.entry(source.clone()).or_default().push((proj[0], proj[1]));
        }
        let svg = report::scatter_svg(&series, "principal component projection");
        std::fs::write(svg_path, svg)
            .map_err(|e| AppError::Data(format!("{}: {e}", svg_path.display())))?;
    }
    let explained: Vec<String> = out.explained.iter().map(|&e| fmt_sig(e, 3)).collect();
    println!(
        "projected {} records; explained variance {} -> {}",
        matrix.nrows(),
        explained.join(", "),
        a.out_csv.display()
    );
    Ok(())
}

fn cluster(cfg: &CurationConfig, a: &args::ClusterArgs) -> Result<(), AppError> {
    let ds = dataset::ingest(&a.data)?;
    let matrix = matrix_for(&ds, &a.data)?;
    let k = a.k.unwrap_or(cfg.cluster_count);
    let model = kmeans(&matrix, k, cfg.seed, KmeansParams::default())?;
    write_json(&a.out, &model)?;
    println!(
        "fit {} clusters over {} records in {} iterations (objective {}) -> {}",
        model.k,
        matrix.nrows(),
        model.iterations,
        fmt_sig(*model.objective.last().unwrap_or(&0.0), 6),
        a.out.display()
    );
    Ok(())
}

fn read_model(path: &Path) -> Result<ClusterModel, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| AppError::Data(format!("{}: not a cluster model: {e}", path.display())))
}

fn allocate(cfg: &CurationConfig, a: &args::AllocateArgs) -> Result<(), AppError> {
    let model = read_model(&a.model)?;
    let caps = cfg.resolve_caps(&model.sizes);
    let budget = a.budget.unwrap_or(cfg.budget);
    let tau = a.tau.unwrap_or(cfg.dirichlet_tau);
    let alloc = plan::allocate_sqrt(&model.sizes, &caps, budget, tau, cfg.seed)?;
    write_json(&a.out, &alloc)?;
    let placed: usize = alloc.counts.iter().sum();
    if !alloc.feasible {
        eprintln!(
            "warning: budget {budget} exceeds the capped supply {placed}; counts fall back to capacity"
        );
    }
    println!(
        "allocated {placed} of {budget} across {} clusters -> {}",
        model.k,
        a.out.display()
    );
    if let (Some(data), Some(out_data)) = (&a.data, &a.out_data) {
        let ds = dataset::ingest(data)?;
        let picked = select::sample_plan(&ds, &model, &alloc.counts, cfg.seed)?;
        dataset::export(&picked, out_data)?;
        println!("sampled {} records -> {}", picked.len(), out_data.display());
    }
    Ok(())
}

fn coverage(cfg: &CurationConfig, a: &args::CoverageArgs) -> Result<(), AppError> {
    let queries = dataset::ingest(&a.data)?;
    let corpus = dataset::ingest(&a.corpus)?;
    let q = matrix_for(&queries, &a.data)?;
    let c = matrix_for(&corpus, &a.corpus)?;
    let labels: Vec<bool> =
        corpus.records.iter().map(|r| r.source == a.label_source).collect();
    let rep = knn_coverage(&q, &c, &labels, cfg.knn_k, cfg.coverage_bins)?;
    report::write_coverage_csv(&a.out_csv, q.ids(), &rep)?;
    if let Some(bins_path) = &a.out_bins {
        report::write_coverage_bins_csv(bins_path, &rep)?;
    }
    if let Some(svg_path) = &a.out_svg {
        let bars: Vec<(String, usize)> = rep
            .bin_counts
            .iter()
            .enumerate()
            .map(|(b, &n)| {
                (format!("{}-{}", fmt_sig(rep.bin_edges[b], 2), fmt_sig(rep.bin_edges[b + 1], 2)), n)
            })
            .collect();
        let title = format!("kNN coverage of source \"{}\" (k={})", a.label_source, rep.k);
        std::fs::write(svg_path, report::histogram_svg(&bars, &title))
            .map_err(|e| AppError::Data(format!("{}: {e}", svg_path.display())))?;
    }
    let mean = rep.coverage.iter().sum::<f64>() / rep.coverage.len().max(1) as f64;
    println!(
        "coverage of {} queries against {} corpus records: mean {} -> {}",
        q.nrows(),
        c.nrows(),
        fmt_sig(mean, 3),
        a.out_csv.display()
    );
    Ok(())
}

fn balance(cfg: &CurationConfig, a: &args::BalanceArgs) -> Result<(), AppError> {
    let ds = dataset::ingest(&a.data)?;
    let mode = match (a.total, a.cap) {
        (Some(total), None) => BalanceMode::Uniform { total },
        (None, Some(cap)) => BalanceMode::Capped { cap },
        _ => return Err(AppError::Usage("exactly one of --total or --cap is required".into())),
    };
    let out = select::balance_categories(&ds, mode, cfg.seed);
    dataset::export(&out.dataset, &a.out)?;
    let kept: Vec<String> = out
        .kept
        .iter()
        .map(|(label, n)| {
            let shown = if label.is_empty() { "(none)" } else { label };
            format!("{shown}={n}")
        })
        .collect();
    println!(
        "balanced {} of {} records ({}) -> {}",
        out.dataset.len(),
        ds.len(),
        kept.join(" "),
        a.out.display()
    );
    Ok(())
}

fn mix(cfg: &CurationConfig, a: &args::MixArgs) -> Result<(), AppError> {
    if a.inputs.len() != a.ratios.len() {
        return Err(AppError::Usage(format!(
            "got {} --input but {} --ratio; each input needs a ratio",
            a.inputs.len(),
            a.ratios.len()
        )));
    }
    let mut parts = Vec::with_capacity(a.inputs.len());
    for (path, &ratio) in a.inputs.iter().zip(&a.ratios) {
        parts.push((dataset::ingest(path)?, ratio));
    }
    let out = select::mix(&parts, a.total, cfg.seed)?;
    dataset::export(&out.dataset, &a.out)?;
    if !out.feasible {
        eprintln!(
            "warning: quotas {:?} not met by component sizes; took {:?}",
            out.quotas, out.taken
        );
    }
    println!(
        "mixed {} records (quotas {:?}, taken {:?}) -> {}",
        out.dataset.len(),
        out.quotas,
        out.taken,
        a.out.display()
    );
    Ok(())
}

fn assemble(cfg: &CurationConfig, a: &args::AssembleArgs) -> Result<(), AppError> {
    let ds = dataset::ingest(&a.data)?;
    let budget = a.budget.unwrap_or(cfg.budget);
    let result = select::assemble(&ds, budget, cfg.length_limit_chars, cfg.seed);
    dataset::export(&result.dataset, &a.out)?;
    let audit_path = a.out.with_extension("audit.json");
    write_json(&audit_path, &result.audit)?;
    let svg_path = a.out.with_extension("svg");
    let mut by_source: BTreeMap<String, usize> = BTreeMap::new();
    for r in &result.dataset.records {
        *by_source.entry(r.source.clone()).or_default() += 1;
    }
    let bars: Vec<(String, usize)> = by_source.into_iter().collect();
    std::fs::write(&svg_path, report::histogram_svg(&bars, "assembled records per source"))
        .map_err(|e| AppError::Data(format!("{}: {e}", svg_path.display())))?;
    let audit = &result.audit;
    println!(
        "assembled {} of {} records (dedup {}, length {}, budget {}) -> {}",
        audit.after_budget,
        audit.input,
        audit.after_dedup,
        audit.after_length,
        audit.budget,
        a.out.display()
    );
    Ok(())
}

fn rewrite(cfg: &CurationConfig, a: &args::RewriteArgs) -> Result<(), AppError> {
    let ds = dataset::ingest(&a.data)?;
    let gw = HttpGateway::from_config(cfg)?;
    let decode = DecodeParams::from_config(cfg);
    let mut tallies: BTreeMap<&str, usize> = BTreeMap::new();
    let mut records = Vec::with_capacity(ds.len());
    for r in &ds.records {
        let out = gateway::rewrite_trace(&gw, r, &decode);
        let tag = out.meta.get("rewrite").map(String::as_str).unwrap_or("error");
        *tallies.entry(match tag {
            "accepted" => "accepted",
            "rejected" => "rejected",
            _ => "error",
        })
        .or_default() += 1;
        records.push(out);
    }
    if !ds.is_empty() && tallies.get("error") == Some(&ds.len()) {
        return Err(AppError::Endpoint(format!(
            "rewrite failed for all {} records against {}",
            ds.len(),
            cfg.endpoint
        )));
    }
    let rewritten = Dataset { records, provenance: ds.provenance.clone() };
    dataset::export(&rewritten, &a.out)?;
    println!(
        "rewrote {} records (accepted {}, rejected {}, errors {}) -> {}",
        ds.len(),
        tallies.get("accepted").unwrap_or(&0),
        tallies.get("rejected").unwrap_or(&0),
        tallies.get("error").unwrap_or(&0),
        a.out.display()
    );
    Ok(())
}

fn report_cmd(cfg: &CurationConfig, a: &args::ReportArgs) -> Result<(), AppError> {
    let _ = cfg;
    let data_err = |e: csv::Error| AppError::Data(format!("{}: {e}", a.scores.display()));
    let mut reader = csv::Reader::from_path(&a.scores).map_err(data_err)?;
    let headers = reader.headers().map_err(data_err)?;
    if headers.iter().collect::<Vec<_>>() != ["label", "score"] {
        return Err(AppError::Data(format!(
            "{}: expected header label,score",
            a.scores.display()
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(data_err)?;
        let lineno = i + 2;
        if row.len() != 2 {
            return Err(AppError::Data(format!(
                "{}:{lineno}: expected 2 fields, got {}",
                a.scores.display(),
                row.len()
            )));
        }
        let label = row[0].to_string();
        let score: f64 = row[1].parse().map_err(|_| {
            AppError::Data(format!(
                "{}:{lineno}: score {:?} is not a number",
                a.scores.display(),
                &row[1]
            ))
        })?;
        if !groups.contains_key(&label) {
            order.push(label.clone());
        }
        groups.entry(label).or_default().push(score);
    }
    let rows: Vec<(String, RunStats)> = order
        .into_iter()
        .map(|label| {
            let stats = aggregate_seeds(&groups[&label]).expect("group is non-empty");
            (label, stats)
        })
        .collect();
    report::write_size_sweep_csv(&a.out_csv, &rows)?;
    if let Some(svg_path) = &a.out_svg {
        std::fs::write(svg_path, report::sweep_svg(&rows, "score by dataset size"))
            .map_err(|e| AppError::Data(format!("{}: {e}", svg_path.display())))?;
    }
    println!("aggregated {} labels -> {}", rows.len(), a.out_csv.display());
    Ok(())
}
