//! The `curata` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use curata_core::analysis::{correlation_matrix, epoch_plan, over_scaling, score_histogram};
use curata_core::prompt::{PromptTemplate, DEFAULT_BUDGET, DEFAULT_PLACEHOLDER};
use curata_core::record::compute_percentiles;
use curata_core::scoring::ScoreBatch;
use curata_core::{ExampleRecord, HashKind, PolicyKind, ScoreRecord, SelectionPolicy};
use serde_json::json;

use crate::client::{ClientConfig, HttpClient, MockClient, ScoringClient, API_TOKEN_ENV};
use crate::formats::scores::{read_scores, write_scores};
use crate::formats::selection::{write_selection, SelectionMeta};
use crate::formats::sketch::write_sketch;
use crate::formats::write_atomically;
use crate::manifest::CorpusManifest;
use crate::pipeline::{askllm_score_all, perplexity_score_all, DensityRun, Kernel, PROGRESS_DIR};
use crate::report::{self, parse_tokens};
use crate::{Error, Result};

/// Exit status when a checkpointed run stopped early.
pub const EXIT_INTERRUPTED: u8 = 3;
/// Exit status when some examples could not be scored.
pub const EXIT_PARTIAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "curata", version, about = "Score, sample and analyze pretraining corpora")]
pub struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score embeddings by sketched kernel density.
    ScoreDensity(DensityArgs),
    /// Score examples by the probability an LLM answers "yes".
    ScoreAskllm(AskLlmArgs),
    /// Score examples by negated perplexity.
    ScorePerplexity(PerplexityArgs),
    /// Select a subset of ids from a score file.
    Select(SelectArgs),
    /// Rank correlations, histograms, over-scaling and epoch plans.
    Analyze(AnalyzeArgs),
    /// Iso-compute epoch plan for a sampling ratio.
    Plan(PlanArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    L2,
    Cosine,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    #[arg(long, default_value_t = 20000)]
    pub range: u32,
    /// Kernel bandwidth; defaults to the median pairwise distance of a sample.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, value_enum, default_value = "l2")]
    pub kernel: KernelArg,
    /// Projections per row for the cosine kernel.
    #[arg(long, default_value_t = 16)]
    pub bits: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Continue from the progress ledger of an interrupted run.
    #[arg(long)]
    pub resume: bool,
    /// Stop after this many shard units (testing aid).
    #[arg(long, hide = true)]
    pub max_shard_units: Option<usize>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("backend").required(true).args(["endpoint", "mock"])))]
pub struct ClientArgs {
    /// Base URL of the scoring service.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Use the deterministic offline model.
    #[arg(long)]
    pub mock: bool,
    /// Model id sent to the service (defaults to "mock" with --mock).
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 16)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 30.0)]
    pub timeout_secs: f64,
    #[arg(long, default_value_t = 4)]
    pub retries: u32,
    #[arg(long, default_value_t = 100)]
    pub backoff_ms: u64,
    #[arg(long, env = API_TOKEN_ENV, hide_env_values = true)]
    pub api_token: Option<String>,
}

#[derive(Debug, Args)]
pub struct AskLlmArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub client: ClientArgs,
    /// File holding the prompt template.
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_PLACEHOLDER)]
    pub placeholder: String,
    /// Character budget for example text; 0 disables truncation.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
}

#[derive(Debug, Args)]
pub struct PerplexityArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub client: ClientArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    TopK,
    BottomK,
    Ips,
    InversePropensity,
    Propensity,
    Uniform,
    /// Coverage preset: inverse-propensity sampling.
    Density,
    /// Quality preset: top-k.
    Askllm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Inverse,
    Direct,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("size").required(true).args(["ratio", "k"])))]
pub struct SelectArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub policy: PolicyArg,
    /// Weight direction for --policy ips.
    #[arg(long, value_enum, default_value = "inverse")]
    pub direction: DirectionArg,
    /// Fraction of records to keep; k = round(ratio × N), halves rounded up.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("plan").multiple(true).requires_all(["dataset_tokens", "ratio", "budget_tokens"]).args(["dataset_tokens", "ratio", "budget_tokens"])))]
pub struct AnalyzeArgs {
    /// Score files; repeat the flag for several.
    #[arg(long)]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Tab-separated metric file: metric, sampled, full, reference, higher_is_better.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long, value_parser = parse_tokens)]
    pub dataset_tokens: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long, value_parser = parse_tokens)]
    pub budget_tokens: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Token counts accept K, M, B and T suffixes.
    #[arg(long, value_parser = parse_tokens)]
    pub dataset_tokens: f64,
    #[arg(long)]
    pub ratio: f64,
    #[arg(long, value_parser = parse_tokens)]
    pub budget_tokens: f64,
    /// Also write plan.tsv here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::ScoreDensity(a) => score_density(a),
        Command::ScoreAskllm(a) => score_askllm(a),
        Command::ScorePerplexity(a) => score_perplexity(a),
        Command::Select(a) => select(a),
        Command::Analyze(a) => analyze(a),
        Command::Plan(a) => plan(a),
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_atomically(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        out.write_all(b"\n")
    })
}

fn with_percentiles(records: &[ScoreRecord]) -> Result<Vec<ScoreRecord>> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    Ok(compute_percentiles(records)?)
}

fn score_density(a: DensityArgs) -> Result<ExitCode> {
    let manifest = CorpusManifest::load(&a.manifest)?;
    create_out(&a.out)?;
    let kernel = match a.kernel {
        KernelArg::L2 => Kernel::Euclidean { bandwidth: a.bandwidth },
        KernelArg::Cosine => Kernel::Cosine { bits: a.bits },
    };
    let (spec, bandwidth_reads) = kernel.resolve(&manifest, a.rows, a.range, a.seed)?;
    let progress = a.out.join(PROGRESS_DIR);
    let result = DensityRun::new(&manifest, spec)
        .checkpoint(&progress, a.resume, a.max_shard_units)?
        .run();
    let mut output = match result {
        Err(Error::Interrupted) => {
            log::warn!("{}", Error::Interrupted);
            return Ok(ExitCode::from(EXIT_INTERRUPTED));
        }
        other => other?,
    };
    output.counters.bandwidth = bandwidth_reads;
    log::info!(
        "records read: {} bandwidth, {} build, {} score",
        output.counters.bandwidth,
        output.counters.build,
        output.counters.score
    );
    let scores = with_percentiles(&output.scores)?;
    write_scores(a.out.join("density.scores.jsonl"), &scores)?;
    write_sketch(a.out.join("density.sketch"), &output.sketch)?;
    let (kind, param) = match spec.kind {
        HashKind::EuclideanPStable { bandwidth } => ("l2", json!({ "bandwidth": bandwidth })),
        HashKind::CosineSignedProjection { bits } => ("cosine", json!({ "bits": bits })),
    };
    write_json(
        &a.out.join("density.meta.json"),
        &json!({
            "scorer_id": curata_core::scoring::density_scorer_id(&spec),
            "kernel": kind,
            "kernel_params": param,
            "dimension": spec.dimension,
            "rows": spec.rows,
            "range": spec.range,
            "seed": spec.seed,
            "records": scores.len(),
            "sketch_payload_bytes": output.sketch.payload_bytes(),
        }),
    )?;
    fs::remove_dir_all(&progress).map_err(Error::io(&progress))?;
    Ok(ExitCode::SUCCESS)
}

fn build_client(a: &ClientArgs) -> Result<Box<dyn ScoringClient>> {
    if a.mock {
        let model = a.model.clone().unwrap_or_else(|| "mock".into());
        return Ok(Box::new(MockClient::with_model(model).max_in_flight(a.max_in_flight)));
    }
    let endpoint = a.endpoint.clone().expect("clap enforces the backend group");
    let model = a
        .model
        .clone()
        .ok_or_else(|| Error::Usage("--model is required with --endpoint".into()))?;
    if !(a.timeout_secs.is_finite() && a.timeout_secs > 0.0) {
        return Err(Error::Usage("--timeout-secs must be positive".into()));
    }
    let mut config = ClientConfig::new(endpoint, model);
    config.max_in_flight = a.max_in_flight;
    config.timeout = Duration::from_secs_f64(a.timeout_secs);
    config.retries = a.retries;
    config.backoff_initial = Duration::from_millis(a.backoff_ms);
    config.api_token = a.api_token.clone();
    Ok(Box::new(HttpClient::new(config)?))
}

fn load_examples(path: &Path) -> Result<Vec<ExampleRecord>> {
    CorpusManifest::load(path)?.load_examples().collect()
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Error::io("<tokio runtime>"))
}

/// Writes `<kind>.scores.jsonl`, `<kind>.unscored.jsonl` and
/// `<kind>.meta.json`; returns the exit code for the run.
fn write_batch(out: &Path, kind: &str, batch: &ScoreBatch, mut meta: serde_json::Value) -> Result<ExitCode> {
    create_out(out)?;
    let scores = with_percentiles(&batch.records())?;
    write_scores(out.join(format!("{kind}.scores.jsonl")), &scores)?;
    write_atomically(&out.join(format!("{kind}.unscored.jsonl")), |w| {
        for (id, reason) in batch.unscored() {
            serde_json::to_writer(&mut *w, &json!({ "id": id, "reason": reason }))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    let unscored = batch.entries.len() - batch.scored_count();
    let truncated: Vec<&str> = batch
        .entries
        .iter()
        .filter(|e| e.truncated)
        .map(|e| e.id.as_str())
        .collect();
    let m = meta.as_object_mut().expect("meta is an object");
    m.insert("scorer_id".into(), json!(batch.scorer_id));
    m.insert("examples".into(), json!(batch.entries.len()));
    m.insert("scored".into(), json!(batch.scored_count()));
    m.insert("unscored".into(), json!(unscored));
    m.insert("truncated_ids".into(), json!(truncated));
    write_json(&out.join(format!("{kind}.meta.json")), &meta)?;
    if unscored > 0 {
        log::warn!("{unscored} examples could not be scored; see {kind}.unscored.jsonl");
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn score_askllm(a: AskLlmArgs) -> Result<ExitCode> {
    let text = match &a.template {
        Some(p) => fs::read_to_string(p).map_err(Error::io(p))?,
        None => curata_core::prompt::DEFAULT_TEMPLATE.to_owned(),
    };
    let text = text.strip_suffix('\n').unwrap_or(&text).to_owned();
    let template = PromptTemplate::with_placeholder(text, a.placeholder.as_str())?
        .budget((a.budget > 0).then_some(a.budget));
    let examples = load_examples(&a.manifest)?;
    let client = build_client(&a.client)?;
    let batch = runtime()?.block_on(askllm_score_all(client.as_ref(), &template, &examples));
    let meta = json!({
        "model": client.model_id(),
        "template_fingerprint": template.fingerprint(),
        "budget": a.budget,
    });
    write_batch(&a.out, "askllm", &batch, meta)
}

fn score_perplexity(a: PerplexityArgs) -> Result<ExitCode> {
    let examples = load_examples(&a.manifest)?;
    let client = build_client(&a.client)?;
    let batch = runtime()?.block_on(perplexity_score_all(client.as_ref(), &examples));
    write_batch(&a.out, "perplexity", &batch, json!({ "model": client.model_id() }))
}

/// `round(ratio × n)` with halves rounded up.
pub fn ratio_to_k(ratio: f64, n: usize) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Usage(format!("--ratio must be in (0, 1], got {ratio}")));
    }
    Ok((ratio * n as f64 + 0.5).floor() as usize)
}

fn select(a: SelectArgs) -> Result<ExitCode> {
    let scores = read_scores(&a.scores)?;
    let n = scores.len();
    let k = match (a.k, a.ratio) {
        (Some(k), _) => k,
        (None, Some(r)) => ratio_to_k(r, n)?,
        (None, None) => unreachable!("clap enforces the size group"),
    };
    let kind = match (a.policy, a.direction) {
        (PolicyArg::TopK | PolicyArg::Askllm, _) => PolicyKind::TopK,
        (PolicyArg::BottomK, _) => PolicyKind::BottomK,
        (PolicyArg::Ips, DirectionArg::Inverse) | (PolicyArg::InversePropensity | PolicyArg::Density, _) => {
            PolicyKind::InversePropensity
        }
        (PolicyArg::Ips, DirectionArg::Direct) | (PolicyArg::Propensity, _) => PolicyKind::Propensity,
        (PolicyArg::Uniform, _) => PolicyKind::UniformRandom,
    };
    let result = SelectionPolicy::new(kind, k, a.seed).apply(&scores)?;
    let scorer_id = scores.first().map_or("", |s| s.scorer_id.as_str());
    let meta = SelectionMeta::describe(&result, n, scorer_id);
    create_out(&a.out)?;
    write_selection(&a.out, &result.ids, &meta)?;
    Ok(ExitCode::SUCCESS)
}

fn analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    if a.scores.is_empty() && a.metrics.is_none() && a.dataset_tokens.is_none() {
        return Err(Error::Usage("nothing to analyze: pass --scores, --metrics or the plan arguments".into()));
    }
    create_out(&a.out)?;
    let mut report = serde_json::Map::new();

    let sets = a.scores.iter().map(read_scores).collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = a
        .scores
        .iter()
        .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned()))
        .collect();
    let mut histograms = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let values: Vec<f64> = set.iter().map(|s| s.raw_score).collect();
        let h = score_histogram(&values, a.bins)?;
        report::write_histogram(&a.out.join(format!("histogram-{i}.tsv")), &h)?;
        histograms.push(json!({ "input": labels[i], "edges": h.edges, "counts": h.counts }));
    }
    if !histograms.is_empty() {
        report.insert("histograms".into(), json!(histograms));
    }
    if sets.len() >= 2 {
        let refs: Vec<&[ScoreRecord]> = sets.iter().map(Vec::as_slice).collect();
        let m = correlation_matrix(&refs)?;
        report::write_tau_matrix(&a.out.join("tau_matrix.tsv"), &labels, &m)?;
        report.insert(
            "tau_matrix".into(),
            json!({ "labels": labels, "values": m.values, "common": m.common, "dropped": m.dropped }),
        );
    }
    if let Some(path) = &a.metrics {
        let triples = report::read_metrics(path)?;
        let result = over_scaling(&triples)?;
        for name in &result.skipped {
            log::warn!("metric {name:?} skipped: reference equals full-data value");
        }
        report::write_overscaling(&a.out.join("overscaling.tsv"), &triples, &result)?;
        report.insert(
            "overscaling".into(),
            json!({ "percent": result.percent, "used": result.used, "skipped": result.skipped }),
        );
    }
    if let (Some(d), Some(r), Some(b)) = (a.dataset_tokens, a.ratio, a.budget_tokens) {
        let plan = epoch_plan(d, r, b)?;
        report::write_plan(&a.out.join("plan.tsv"), &plan)?;
        report.insert(
            "plan".into(),
            json!({
                "dataset_tokens": plan.dataset_tokens,
                "sampling_ratio": plan.sampling_ratio,
                "budget_tokens": plan.budget_tokens,
                "sampled_tokens": plan.sampled_tokens,
                "epochs": plan.epochs,
            }),
        );
    }
    write_json(&a.out.join("report.json"), &serde_json::Value::Object(report))?;
    Ok(ExitCode::SUCCESS)
}

fn plan(a: PlanArgs) -> Result<ExitCode> {
    let plan = epoch_plan(a.dataset_tokens, a.ratio, a.budget_tokens)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io = Error::io("<stdout>");
    writeln!(out, "{}\n{}", report::PLAN_HEADER.join("\t"), report::format_plan(&plan).join("\t")).map_err(io)?;
    if let Some(dir) = &a.out {
        create_out(dir)?;
        report::write_plan(&dir.join("plan.tsv"), &plan)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn ratio_rounding() {
        assert_eq!(ratio_to_k(0.2, 7).unwrap(), 1);
        assert_eq!(ratio_to_k(0.5, 3).unwrap(), 2);
        assert_eq!(ratio_to_k(1.0, 9).unwrap(), 9);
        assert_eq!(ratio_to_k(0.25, 10).unwrap(), 3);
        assert!(ratio_to_k(0.0, 5).is_err());
        assert!(ratio_to_k(1.5, 5).is_err());
    }

    #[test]
    fn backend_is_required() {
        let err = Cli::try_parse_from(["curata", "score-askllm", "--manifest", "m", "--out", "o"]).unwrap_err();
        assert_eq!(err.kind(), clap::error::ErrorKind::MissingRequiredArgument);
        let err = Cli::try_parse_from(["curata", "select", "--scores", "s", "--out", "o", "--policy", "top-k", "--k", "1", "--ratio", "0.5"])
            .unwrap_err();
        assert_eq!(err.kind(), clap::error::ErrorKind::ArgumentConflict);
    }
}
