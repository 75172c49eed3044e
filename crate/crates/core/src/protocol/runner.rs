use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{extract_manifest, load_truths, GroundTruth};
use crate::frames::{encode_png, model_images, sample_frames, EncodedImage, FrameError};
use crate::gateway::{expected_images, Gateway, GatewayError, QueryContext, TransportStatus};
use crate::prompt::{build_prompt_with, parse_response, ParseStatus, ParsedResponse, PromptBundle, PromptTemplate};
use crate::scene::{AnnotationSchema, Manifest, SamplingConfig};

use super::record::{model_record_id, now_rfc3339};
use super::store::{PromptLog, RecordStore, RunManifest, StoreError, PROMPTS_FILE, RECORDS_FILE};
use super::{EvaluationRecord, PhasePlan, PlanError, ScenarioSampler};

/// What the model is sent as pixels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImagePolicy {
    /// Sample the clip and render collages or frames at the config's
    /// resolution.
    #[default]
    Render,
    /// Send 1×1 stand-ins in the right number. Only meaningful for mock
    /// endpoints, which never look at pixels; it keeps large offline sweeps
    /// fast.
    Placeholder,
}

fn default_parallelism() -> usize {
    8
}
fn default_draw_factor() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Also sample scenarios whose ground truth still needs curation.
    #[serde(default)]
    pub include_uncurated: bool,
    /// Configs processed at once. Requests are further limited by the
    /// endpoint's own parallelism.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub images: ImagePolicy,
    /// A config gives up after `quota × factor + pool size` draws.
    #[serde(default = "default_draw_factor")]
    pub max_draw_factor: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            include_uncurated: false,
            parallelism: default_parallelism(),
            images: ImagePolicy::Render,
            max_draw_factor: default_draw_factor(),
        }
    }
}

/// Stops a run early, as an interruption would.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunLimits {
    pub max_new_records: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub phase: u8,
    pub config_key: String,
    pub missing: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model_id: String,
    pub configs: usize,
    pub records_total: usize,
    pub new_records: usize,
    /// New records whose query failed in transport.
    pub failed: usize,
    /// Draws skipped because the clip could not be sampled.
    pub skipped_assets: usize,
    pub shortfalls: Vec<Shortfall>,
    pub interrupted: bool,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("no scenario has a usable ground truth")]
    EmptyPool,
    #[error("ground truth for {scenario_id} has {found} letters, schema has {expected} categories")]
    SchemaMismatch {
        scenario_id: String,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{model_id} rejected the credentials (HTTP {code})")]
    Auth { model_id: String, code: u16 },
    #[error("cannot read {path}: {message}")]
    Input { path: String, message: String },
}

/// Inputs shared by every query of a run.
#[derive(Debug, Clone, Copy)]
pub struct RunInputs<'a> {
    pub manifest: &'a Manifest,
    pub truths: &'a [GroundTruth],
    pub schema: &'a AnnotationSchema,
    pub template: &'a PromptTemplate,
}

enum Draw {
    Completed,
    Failed,
    Skipped,
    Stopped,
}

struct Shared<'a> {
    inputs: RunInputs<'a>,
    truths: HashMap<&'a str, &'a GroundTruth>,
    gateway: &'a Gateway,
    store: &'a RecordStore,
    prompts: Option<&'a PromptLog>,
    options: &'a RunOptions,
    limits: RunLimits,
    reserved: AtomicUsize,
    stopped: AtomicBool,
    appended: AtomicUsize,
    failed: AtomicUsize,
    skipped: AtomicUsize,
    fatal: Mutex<Option<RunError>>,
}

fn placeholder_images(config: &SamplingConfig) -> Vec<EncodedImage> {
    let pixel = image::RgbImage::from_pixel(1, 1, image::Rgb([128, 128, 128]));
    let bytes = encode_png(&pixel).expect("1x1 png encodes");
    (0..expected_images(config))
        .map(|_| EncodedImage::png(bytes.clone()))
        .collect()
}

async fn images_for(
    shared: &Shared<'_>,
    scenario_id: &str,
    config: &SamplingConfig,
) -> Result<Vec<EncodedImage>, FrameError> {
    if shared.options.images == ImagePolicy::Placeholder {
        return Ok(placeholder_images(config));
    }
    let source = shared
        .inputs
        .manifest
        .get(scenario_id)
        .cloned()
        .ok_or_else(|| FrameError::Unreadable {
            path: scenario_id.to_string(),
            message: "not in manifest".into(),
        })?;
    let base = shared.inputs.manifest.base_dir.clone();
    let config = *config;
    tokio::task::spawn_blocking(move || {
        let seq = sample_frames(&source, base.as_deref(), config.interval_ms, config.frame_count)?;
        model_images(&seq, &config)
    })
    .await
    .map_err(|e| FrameError::Encode(e.to_string()))?
}

#[allow(clippy::too_many_arguments)]
async fn run_draw(
    shared: &Shared<'_>,
    phase: u8,
    config: &SamplingConfig,
    bundle: &PromptBundle,
    prompt_sha256: &str,
    scenario_id: &str,
    draw_index: u32,
) -> Draw {
    if shared.stopped.load(Ordering::SeqCst) {
        return Draw::Stopped;
    }
    let truth = shared.truths[scenario_id];
    let images = match images_for(shared, scenario_id, config).await {
        Ok(images) => images,
        Err(e) => {
            tracing::warn!(scenario_id, config = %config.key(), error = %e, "skipping draw");
            shared.skipped.fetch_add(1, Ordering::SeqCst);
            return Draw::Skipped;
        }
    };
    if let Some(max) = shared.limits.max_new_records {
        if shared.reserved.fetch_add(1, Ordering::SeqCst) >= max {
            shared.stopped.store(true, Ordering::SeqCst);
            return Draw::Stopped;
        }
    }
    let ctx = QueryContext {
        scenario_id,
        schema: shared.inputs.schema,
        truth: Some(&truth.key),
    };
    let outcome = match shared.gateway.send(bundle, &images, config, ctx).await {
        Ok(o) => o,
        Err(e) => {
            shared.fatal.lock().unwrap().get_or_insert(RunError::Gateway(e));
            shared.stopped.store(true, Ordering::SeqCst);
            return Draw::Stopped;
        }
    };
    let predicted = if outcome.status.is_ok() {
        parse_response(&outcome.raw_text, shared.inputs.schema)
    } else {
        ParsedResponse {
            status: ParseStatus::Unparseable,
            key: None,
            raw_text: outcome.raw_text.clone(),
        }
    };
    let model_id = &shared.gateway.endpoint().model_id;
    let record = EvaluationRecord {
        record_id: model_record_id(phase, model_id, config, draw_index),
        scenario_id: scenario_id.to_string(),
        model_id: Some(model_id.clone()),
        evaluator_id: None,
        presentation: config.mode.as_str().to_string(),
        config: *config,
        predicted,
        truth: truth.clone(),
        latency_s: outcome.latency_s,
        timestamp: now_rfc3339(),
        phase: Some(phase),
        draw_index,
        transport: outcome.status.clone(),
        attempts: outcome.attempts,
        prompt_sha256: Some(prompt_sha256.to_string()),
    };
    if let Err(e) = shared.store.append(&record) {
        shared.fatal.lock().unwrap().get_or_insert(RunError::Store(e));
        shared.stopped.store(true, Ordering::SeqCst);
        return Draw::Stopped;
    }
    shared.appended.fetch_add(1, Ordering::SeqCst);
    match outcome.status {
        TransportStatus::Ok => Draw::Completed,
        TransportStatus::Auth { code } => {
            shared.fatal.lock().unwrap().get_or_insert(RunError::Auth {
                model_id: model_id.clone(),
                code,
            });
            shared.stopped.store(true, Ordering::SeqCst);
            Draw::Stopped
        }
        _ => {
            shared.failed.fetch_add(1, Ordering::SeqCst);
            Draw::Failed
        }
    }
}

async fn run_config(
    shared: &Shared<'_>,
    pool: &[(String, String)],
    plan: &PhasePlan,
    config: SamplingConfig,
    done: HashMap<u32, bool>,
) -> Result<Option<Shortfall>, RunError> {
    let quota = plan.evaluations_per_config;
    let bundle = build_prompt_with(shared.inputs.template, &config, shared.inputs.schema);
    let prompt_sha256 = match shared.prompts {
        Some(log) => log.log(&config.key(), &bundle)?,
        None => bundle.sha256(),
    };
    let salt = format!("p{}/{}", plan.phase, config.key());
    let mut sampler = ScenarioSampler::new(pool, plan.seed, &salt);
    let max_draws = quota.saturating_mul(shared.options.max_draw_factor) + pool.len() as u32;
    let mut successes = done.values().filter(|ok| **ok).count() as u32;
    let mut next = 0u32;
    while successes < quota && next < max_draws && !shared.stopped.load(Ordering::SeqCst) {
        let mut batch = Vec::new();
        while batch.len() < (quota - successes) as usize && next < max_draws {
            if !done.contains_key(&next) {
                let scenario = sampler.draw(next).expect("pool is not empty").to_string();
                batch.push((next, scenario));
            }
            next += 1;
        }
        let results = futures::future::join_all(batch.iter().map(|(d, s)| {
            run_draw(shared, plan.phase, &config, &bundle, &prompt_sha256, s, *d)
        }))
        .await;
        successes += results
            .iter()
            .filter(|r| matches!(r, Draw::Completed))
            .count() as u32;
    }
    if successes < quota && !shared.stopped.load(Ordering::SeqCst) {
        tracing::warn!(phase = plan.phase, config = %config.key(), successes, quota, "config short of quota");
        return Ok(Some(Shortfall {
            phase: plan.phase,
            config_key: config.key(),
            missing: quota - successes,
        }));
    }
    Ok(None)
}

/// Runs every config of every plan against one gateway, appending records
/// to `store`. Draws already present in `existing` (for this model) are
/// never repeated, so calling this again after an interruption completes
/// the run without duplicates.
#[allow(clippy::too_many_arguments)]
pub async fn run_plans(
    plans: &[PhasePlan],
    inputs: RunInputs<'_>,
    gateway: &Gateway,
    store: &RecordStore,
    prompts: Option<&PromptLog>,
    existing: &[EvaluationRecord],
    options: &RunOptions,
    limits: RunLimits,
) -> Result<RunSummary, RunError> {
    let model_id = gateway.endpoint().model_id.clone();
    let mut configs = Vec::new();
    for plan in plans {
        plan.validate()?;
        for c in plan.expand()? {
            configs.push((plan, c));
        }
    }

    let in_manifest: HashSet<&str> = inputs
        .manifest
        .scenarios
        .iter()
        .map(|s| s.scenario_id.as_str())
        .collect();
    let mut truths = HashMap::new();
    let mut pool = Vec::new();
    for t in inputs.truths {
        if t.key.len() != inputs.schema.len() {
            return Err(RunError::SchemaMismatch {
                scenario_id: t.scenario_id.clone(),
                expected: inputs.schema.len(),
                found: t.key.len(),
            });
        }
        if !in_manifest.contains(t.scenario_id.as_str()) || (t.needs_curation && !options.include_uncurated) {
            continue;
        }
        if truths.insert(t.scenario_id.as_str(), t).is_none() {
            pool.push((t.scenario_id.clone(), t.key.to_string()));
        }
    }
    if pool.is_empty() {
        return Err(RunError::EmptyPool);
    }
    pool.sort();

    let mut done: HashMap<(u8, String), HashMap<u32, bool>> = HashMap::new();
    for r in existing.iter().filter(|r| r.model_id.as_deref() == Some(model_id.as_str())) {
        if let Some(phase) = r.phase {
            done.entry((phase, r.config.key()))
                .or_default()
                .insert(r.draw_index, r.completed());
        }
    }

    let shared = Shared {
        inputs,
        truths,
        gateway,
        store,
        prompts,
        options,
        limits,
        reserved: AtomicUsize::new(0),
        stopped: AtomicBool::new(false),
        appended: AtomicUsize::new(0),
        failed: AtomicUsize::new(0),
        skipped: AtomicUsize::new(0),
        fatal: Mutex::new(None),
    };
    let results: Vec<Result<Option<Shortfall>, RunError>> = stream::iter(configs.iter().map(|(plan, c)| {
        let d = done.get(&(plan.phase, c.key())).cloned().unwrap_or_default();
        run_config(&shared, &pool, plan, *c, d)
    }))
    .buffer_unordered(options.parallelism.max(1))
    .collect()
    .await;

    if let Some(e) = shared.fatal.lock().unwrap().take() {
        return Err(e);
    }
    let mut shortfalls = Vec::new();
    for r in results {
        if let Some(s) = r? {
            shortfalls.push(s);
        }
    }
    shortfalls.sort_by(|a, b| (a.phase, &a.config_key).cmp(&(b.phase, &b.config_key)));
    Ok(RunSummary {
        model_id,
        configs: configs.len(),
        new_records: shared.appended.load(Ordering::SeqCst),
        records_total: store.records()?.len(),
        failed: shared.failed.load(Ordering::SeqCst),
        skipped_assets: shared.skipped.load(Ordering::SeqCst),
        shortfalls,
        interrupted: shared.stopped.load(Ordering::SeqCst),
    })
}

/// Loads the manifest and ground truths a run manifest points at. Without
/// a truths file, truths are extracted from the captions.
pub fn load_run_inputs(run: &RunManifest) -> Result<(Manifest, Vec<GroundTruth>), RunError> {
    let manifest = Manifest::load(&run.manifest_path).map_err(|e| RunError::Input {
        path: run.manifest_path.clone(),
        message: e.to_string(),
    })?;
    let truths = match &run.truths_path {
        Some(p) => load_truths(p).map_err(|e| RunError::Input {
            path: p.clone(),
            message: e.to_string(),
        })?,
        None => extract_manifest(&manifest, &run.schema).truths,
    };
    Ok((manifest, truths))
}

/// Runs (or resumes) the run described by `run_dir/run.json`.
pub async fn execute_run(run_dir: &Path, gateway: &Gateway, limits: RunLimits) -> Result<RunSummary, RunError> {
    let run = RunManifest::read(run_dir)?;
    let (manifest, truths) = load_run_inputs(&run)?;
    let (store, existing) = RecordStore::open(run_dir.join(RECORDS_FILE))?;
    let prompts = PromptLog::open(run_dir.join(PROMPTS_FILE))?;
    let inputs = RunInputs {
        manifest: &manifest,
        truths: &truths,
        schema: &run.schema,
        template: &run.template,
    };
    let summary = run_plans(
        &run.plans,
        inputs,
        gateway,
        &store,
        Some(&prompts),
        &existing,
        &run.options,
        limits,
    )
    .await?;
    let path = run_dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary).expect("summary serializes")).map_err(|e| {
        StoreError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    })?;
    Ok(summary)
}

/// Creates `out_dir/<run_id>/run.json` and returns the run directory.
pub fn create_run(out_dir: &Path, run: &RunManifest) -> Result<PathBuf, RunError> {
    let dir = out_dir.join(&run.run_id);
    run.write(&dir)?;
    Ok(dir)
}
