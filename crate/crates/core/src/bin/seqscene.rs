use std::collections::BTreeMap;
use std::error::Error;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqscene::annotate::{extract_manifest, load_truths, write_truths};
use seqscene::frames::generate_assets;
use seqscene::gateway::{EndpointRegistry, Gateway};
use seqscene::metrics::{build_report, render_sensitivity, sensitivity, Averaging, ScoreOptions};
use seqscene::prompt::PromptTemplate;
use seqscene::protocol::{
    create_run, execute_run, load_records, now_rfc3339, Dimension, EvaluationRecord, ImagePolicy,
    PhasePlan, RunLimits, RunManifest, RunOptions, RunSummary, RECORDS_FILE,
};
use seqscene::scene::{
    default_covla_schema, AnnotationSchema, GridLayout, Manifest, PresentationMode, Resolution,
    SamplingConfig, ScoreWeights,
};
use seqscene::service::{BaselineService, HumanPlan, ServiceConfig};

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "seqscene", version, about = "Input-configuration sensitivity harness for vision-language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render collages, frame PNGs and GIFs for every scenario in a manifest.
    Generate(GenerateArgs),
    /// Extract ground-truth answer keys from captions.
    Annotate(AnnotateArgs),
    /// Start a new evaluation run.
    Run(RunArgs),
    /// Continue an interrupted run.
    Resume(ResumeArgs),
    /// Score records and write the full report.
    Report(ReportArgs),
    /// One-way ANOVA of accuracy across one configuration dimension.
    Sensitivity(SensitivityArgs),
    /// Start the human baseline service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SchemaArg {
    /// Annotation schema JSON; the built-in seven-category schema if omitted.
    #[arg(long)]
    schema: Option<PathBuf>,
}

impl SchemaArg {
    fn load(&self) -> Result<AnnotationSchema> {
        Ok(match &self.schema {
            Some(p) => AnnotationSchema::load(p)?,
            None => default_covla_schema(),
        })
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 500)]
    interval: u32,
    #[arg(long, default_value_t = 4)]
    frames: u32,
    #[arg(long, default_value_t = 1)]
    resolution_level: u8,
    /// RxC; a single row when omitted.
    #[arg(long)]
    grid: Option<GridLayout>,
    #[arg(long, default_value = "collage")]
    mode: PresentationMode,
    #[arg(long)]
    out_dir: PathBuf,
    /// Orders scenarios when `--limit` picks a subset.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    limit: Option<usize>,
    /// Also write a looping GIF at the sampling interval.
    #[arg(long)]
    gif: bool,
}

#[derive(Args)]
struct AnnotateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    schema: SchemaArg,
    /// Ground-truth JSONL.
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Standard phase(s) to run, 1 to 5; repeatable. Ignored with `--plan`.
    #[arg(long)]
    phase: Vec<u8>,
    /// Phase plan JSON (one plan or an array).
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    manifest: PathBuf,
    /// Ground truths from `annotate`; extracted from captions if omitted.
    #[arg(long)]
    truths: Option<PathBuf>,
    #[command(flatten)]
    schema: SchemaArg,
    #[arg(long)]
    template: Option<PathBuf>,
    /// Endpoint registry JSON.
    #[arg(long)]
    endpoint: PathBuf,
    /// Model id in the registry; the only entry if omitted.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    evaluations: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    include_uncurated: bool,
    /// Send 1×1 placeholder images instead of rendering (mock sweeps).
    #[arg(long)]
    placeholder_images: bool,
    #[arg(long, default_value_t = 8)]
    parallelism: usize,
    /// Stop after this many new records.
    #[arg(long)]
    max_records: Option<usize>,
}

#[derive(Args)]
struct ResumeArgs {
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long)]
    max_records: Option<usize>,
}

#[derive(Args)]
struct ScoringArgs {
    /// A run directory, a records file, or a directory searched recursively.
    #[arg(long, required = true)]
    runs: Vec<PathBuf>,
    #[command(flatten)]
    schema: SchemaArg,
    /// Comma-separated category weights.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    /// Support-weighted instead of macro averaging.
    #[arg(long)]
    weighted: bool,
    /// Count refusals and unparseable answers as wrong.
    #[arg(long)]
    strict: bool,
}

impl ScoringArgs {
    fn options(&self) -> Result<ScoreOptions> {
        Ok(ScoreOptions {
            weights: if self.weights.is_empty() {
                None
            } else {
                Some(ScoreWeights::new(self.weights.clone())?)
            },
            averaging: if self.weighted { Averaging::Weighted } else { Averaging::Macro },
            strict: self.strict,
        })
    }

    fn records(&self) -> Result<Vec<EvaluationRecord>> {
        let mut files = Vec::new();
        for p in &self.runs {
            collect_record_files(p, &mut files)?;
        }
        if files.is_empty() {
            return Err("no records found".into());
        }
        let mut out = Vec::new();
        for f in files {
            out.extend(load_records(&f)?);
        }
        Ok(out)
    }
}

fn collect_record_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_file() {
        out.push(path.to_path_buf());
    } else if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
        entries.sort();
        for e in entries {
            if e.is_dir() {
                collect_record_files(&e, out)?;
            } else if e.file_name().is_some_and(|n| n == RECORDS_FILE) {
                out.push(e);
            }
        }
    } else {
        return Err(format!("{} does not exist", path.display()).into());
    }
    Ok(())
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long)]
    out: PathBuf,
    /// Comparison table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON object mapping model id to family.
    #[arg(long)]
    families: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long)]
    dimension: Dimension,
    /// Only this model or evaluator.
    #[arg(long)]
    subject: Option<String>,
    /// Use only records from this phase (all phases when omitted).
    #[arg(long)]
    phase: Option<u8>,
}

#[derive(Args)]
struct ServeArgs {
    /// Questionnaire JSON, or phase plans to derive it from. Defaults to
    /// the five standard phases.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Scenarios per configuration when deriving from phase plans.
    #[arg(long, default_value_t = 1)]
    per_config: u32,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    truths: Option<PathBuf>,
    #[command(flatten)]
    schema: SchemaArg,
    /// Asset cache directory.
    #[arg(long)]
    assets: PathBuf,
    /// Sessions, curation flags and human records.
    #[arg(long, default_value = "baseline-data")]
    data_dir: PathBuf,
    /// Static questionnaire bundle served under /ui.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    if let Err(e) = runtime.block_on(dispatch(cli.command)) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

async fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Annotate(a) => annotate(a),
        Command::Run(a) => run(a).await,
        Command::Resume(a) => resume(a).await,
        Command::Report(a) => report(a),
        Command::Sensitivity(a) => sensitivity_cmd(a),
        Command::Serve(a) => serve(a).await,
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let grid = match a.grid {
        Some(g) => g,
        None => GridLayout::row(a.frames)?,
    };
    let config = SamplingConfig::new(a.interval, a.frames, Resolution::from_level(a.resolution_level)?, grid, a.mode)?;
    let mut scenarios: Vec<_> = manifest.scenarios.iter().collect();
    if let Some(limit) = a.limit {
        scenarios.shuffle(&mut ChaCha8Rng::seed_from_u64(a.seed));
        scenarios.truncate(limit);
    }
    let (mut written, mut skipped) = (0, 0);
    for s in scenarios {
        match generate_assets(s, manifest.base_dir.as_deref(), &config, &a.out_dir, a.gif) {
            Ok(assets) => written += assets.len(),
            Err(e) if e.is_skippable() => {
                tracing::warn!(scenario = %s.scenario_id, error = %e, "skipped");
                skipped += 1;
            }
            Err(e) => return Err(format!("{}: {e}", s.scenario_id).into()),
        }
    }
    println!("{}: {written} assets written, {skipped} scenarios skipped", config.key());
    Ok(())
}

fn annotate(a: AnnotateArgs) -> Result<()> {
    let schema = a.schema.load()?;
    let manifest = Manifest::load(&a.manifest)?;
    let result = extract_manifest(&manifest, &schema);
    write_truths(&a.out, &result.truths)?;
    let s = &result.summary;
    println!(
        "{} scenarios: {} fully matched, {} need curation, {} distinct keys",
        s.total, s.fully_matched, s.needs_curation, s.distinct_keys
    );
    if let Some(path) = a.report {
        std::fs::write(path, serde_json::to_string_pretty(s)?)?;
    }
    Ok(())
}

fn print_summary(dir: &Path, s: &RunSummary) {
    println!("run directory: {}", dir.display());
    println!(
        "{}: {} configs, {} records ({} new, {} failed, {} assets skipped){}",
        s.model_id,
        s.configs,
        s.records_total,
        s.new_records,
        s.failed,
        s.skipped_assets,
        if s.interrupted { ", interrupted" } else { "" }
    );
    for sf in &s.shortfalls {
        println!("  shortfall: phase {} {} missing {}", sf.phase, sf.config_key, sf.missing);
    }
}

async fn run(a: RunArgs) -> Result<()> {
    let schema = a.schema.load()?;
    let template = match &a.template {
        Some(p) => PromptTemplate::load(p)?,
        None => PromptTemplate::default(),
    };
    let registry = EndpointRegistry::load(&a.endpoint)?;
    let endpoint = match &a.model {
        Some(id) => registry.get(id)?.clone(),
        None if registry.endpoints.len() == 1 => registry.endpoints[0].clone(),
        None => return Err("the registry has several endpoints; choose one with --model".into()),
    };
    let mut plans = match &a.plan {
        Some(p) => PhasePlan::load_all(p)?,
        None if a.phase.is_empty() => PhasePlan::standard(),
        None => a
            .phase
            .iter()
            .map(|&k| PhasePlan::standard_phase(k).ok_or_else(|| format!("no standard phase {k}")))
            .collect::<std::result::Result<_, _>>()?,
    };
    for p in &mut plans {
        if let Some(n) = a.evaluations {
            p.evaluations_per_config = n;
        }
        if let Some(seed) = a.seed {
            p.seed = seed;
        }
    }
    let phases: Vec<String> = plans.iter().map(|p| p.phase.to_string()).collect();
    let safe_model: String = endpoint
        .model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    let uuid = uuid::Uuid::new_v4().simple().to_string();
    let run = RunManifest {
        run_id: format!("{safe_model}-p{}-{}", phases.join(""), &uuid[..8]),
        created_at: now_rfc3339(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        endpoint: endpoint.clone(),
        plans,
        schema,
        template,
        manifest_path: absolute(&a.manifest)?,
        truths_path: a.truths.as_deref().map(absolute).transpose()?,
        options: RunOptions {
            include_uncurated: a.include_uncurated,
            parallelism: a.parallelism,
            images: if a.placeholder_images { ImagePolicy::Placeholder } else { ImagePolicy::Render },
            ..RunOptions::default()
        },
    };
    let dir = create_run(&a.out, &run)?;
    let summary = execute_run(&dir, &Gateway::new(endpoint), RunLimits { max_new_records: a.max_records }).await?;
    print_summary(&dir, &summary);
    Ok(())
}

fn absolute(p: &Path) -> Result<String> {
    Ok(std::path::absolute(p)?.display().to_string())
}

async fn resume(a: ResumeArgs) -> Result<()> {
    let run = RunManifest::read(&a.run_dir)?;
    let summary = execute_run(&a.run_dir, &Gateway::new(run.endpoint), RunLimits { max_new_records: a.max_records }).await?;
    print_summary(&a.run_dir, &summary);
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let schema = a.scoring.schema.load()?;
    let options = a.scoring.options()?;
    let records = a.scoring.records()?;
    let families: BTreeMap<String, String> = match &a.families {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => BTreeMap::new(),
    };
    let full = build_report(&records, &schema, &options, &families, &Dimension::ALL)?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&full)?)?;
    if let Some(csv) = &a.csv {
        std::fs::write(csv, full.table.to_csv())?;
    }
    print!("{}", full.table.to_text());
    Ok(())
}

fn sensitivity_cmd(a: SensitivityArgs) -> Result<()> {
    let records: Vec<EvaluationRecord> = a
        .scoring
        .records()?
        .into_iter()
        .filter(|r| a.subject.as_deref().is_none_or(|s| r.subject() == s))
        .filter(|r| a.phase.is_none_or(|p| r.phase == Some(p)))
        .collect();
    let report = sensitivity(&records, a.dimension, a.scoring.strict)?;
    print!("{}", render_sensitivity(&report));
    Ok(())
}

async fn serve(a: ServeArgs) -> Result<()> {
    let schema = a.schema.load()?;
    let manifest = Manifest::load(&a.manifest)?;
    let truths = match &a.truths {
        Some(p) => load_truths(p)?,
        None => extract_manifest(&manifest, &schema).truths,
    };
    let plan = match &a.plan {
        None => HumanPlan::from_phase_plans(&PhasePlan::standard(), &truths, a.per_config),
        Some(path) => match HumanPlan::load(path) {
            Ok(p) => p,
            Err(_) => HumanPlan::from_phase_plans(&PhasePlan::load_all(path)?, &truths, a.per_config),
        },
    };
    let service = BaselineService::open(ServiceConfig {
        schema,
        manifest,
        truths,
        plan,
        asset_dir: a.assets,
        data_dir: a.data_dir,
        ui_dir: a.ui_dir,
    })?;
    let addr = SocketAddr::new(a.host, a.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    println!("listening on http://{}", listener.local_addr()?);
    service.serve(listener).await?;
    Ok(())
}
