//! HTTP service for human baselines and ground-truth curation.
//!
//! Evaluators open a session, step through a fixed questionnaire in a seeded
//! order and answer each item with an answer key. Every accepted answer is
//! also written as an [`EvaluationRecord`] with the evaluator as subject, so
//! human and model results go through the same metrics.
//!
//! A new session starts rendering its assets in the background, in the
//! order it will show them; a request for an asset not yet rendered renders
//! it on the spot. Rendered assets are cached on disk and shared by every
//! session that shows the same scenario in the same mode.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | start a session |
//! | GET | `/sessions/{id}` | session progress |
//! | GET | `/sessions/{id}/next` | current item (does not advance) |
//! | POST | `/sessions/{id}/answers` | answer the current item |
//! | GET | `/assets/{asset_id}` | image or animation bytes |
//! | POST | `/curation/{scenario_id}` | flag a ground truth |
//! | GET | `/curation` | all flags and the disputed truths |
//! | GET | `/export` | human records as JSONL |
//! | GET | `/ui/...` | the questionnaire bundle, when configured |

mod plan;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tower_http::services::ServeDir;

use crate::annotate::{disputed, CurationFlag, GroundTruth};
use crate::frames::{
    asset_dir, asset_id, render_collage, render_gif, sample_frames, sample_segment, write_asset, AssetKind,
    AssetSidecar, FrameError,
};
use crate::prompt::ParsedResponse;
use crate::protocol::{load_records, now_rfc3339, EvaluationRecord, RecordStore, StoreError, RECORDS_FILE};
use crate::scene::{validate_key, AnnotationSchema, AnswerKey, KeyError, Manifest, PresentationMode};

pub use plan::{HumanPlan, HumanPlanItem};

const EVENTS_FILE: &str = "sessions.jsonl";
const CURATION_FILE: &str = "curation.jsonl";

/// How a person sees a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanMode {
    /// The PNG collage a model would get.
    Collage,
    /// The sampled frames looping with a delay equal to the interval.
    Gif,
    /// The source clip over the same span at its native frame rate.
    Video,
}

impl HumanMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HumanMode::Collage => "collage",
            HumanMode::Gif => "gif",
            HumanMode::Video => "video",
        }
    }

    fn asset_kind(self) -> AssetKind {
        match self {
            HumanMode::Collage => AssetKind::Collage,
            HumanMode::Gif => AssetKind::Gif,
            HumanMode::Video => AssetKind::Clip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRef {
    pub asset_id: String,
    pub url: String,
    pub kind: AssetKind,
    pub mime: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_delay_ms: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub scenario_id: String,
    pub config: crate::scene::SamplingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<u8>,
    /// Rendered in the background after session creation, or on first request.
    pub asset_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub evaluator_id: String,
    pub mode: HumanMode,
    pub seed: u64,
    pub assignment: Vec<Assignment>,
    pub cursor: usize,
    pub created_at: String,
}

/// A curation note attached to an answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagInput {
    pub verdict: String,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmittedAnswer {
    pub session_id: String,
    /// 0-based assignment slot.
    pub slot: usize,
    pub scenario_id: String,
    pub key: AnswerKey,
    pub view_duration_s: f64,
    #[serde(default)]
    pub flags: Vec<FlagInput>,
    pub submitted_at: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Session(Session),
    Answer(SubmittedAnswer),
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("the questionnaire plan is empty")]
    EmptyPlan,
    #[error("plan item {0} has no ground truth")]
    MissingTruth(String),
    #[error("plan item {0} is not in the manifest")]
    MissingScenario(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ServiceError + '_ {
    move |e| ServiceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Everything the service is started with.
#[derive(Debug)]
pub struct ServiceConfig {
    pub schema: AnnotationSchema,
    pub manifest: Manifest,
    pub truths: Vec<GroundTruth>,
    pub plan: HumanPlan,
    /// Where rendered assets are cached.
    pub asset_dir: PathBuf,
    /// Session log, curation flags and human records.
    pub data_dir: PathBuf,
    /// Static questionnaire bundle served under `/ui`.
    pub ui_dir: Option<PathBuf>,
}

struct SessionEntry {
    session: Session,
    answers: Vec<SubmittedAnswer>,
}

struct Inner {
    schema: AnnotationSchema,
    manifest: Manifest,
    truths: HashMap<String, GroundTruth>,
    plan: HumanPlan,
    asset_root: PathBuf,
    data_dir: PathBuf,
    /// Every asset id a session refers to.
    assets: RwLock<HashMap<String, (HumanPlanItem, HumanMode)>>,
    render_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    sessions: RwLock<HashMap<String, Arc<tokio::sync::Mutex<SessionEntry>>>>,
    events: Mutex<File>,
    records: RecordStore,
    curation: Mutex<Vec<CurationFlag>>,
}

/// The baseline service. Clone it freely; clones share state.
#[derive(Clone)]
pub struct BaselineService {
    inner: Arc<Inner>,
    ui_dir: Option<PathBuf>,
}

fn append_line(file: &Mutex<File>, path: &Path, value: &impl Serialize) -> Result<(), ServiceError> {
    let mut line = serde_json::to_string(value).expect("event serializes");
    line.push('\n');
    let mut f = file.lock().unwrap();
    f.write_all(line.as_bytes()).map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

impl BaselineService {
    /// Opens the service, replaying sessions and flags from `data_dir`.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        if config.plan.is_empty() {
            return Err(ServiceError::EmptyPlan);
        }
        let truths: HashMap<String, GroundTruth> = config
            .truths
            .into_iter()
            .map(|t| (t.scenario_id.clone(), t))
            .collect();
        for item in &config.plan.items {
            if config.manifest.get(&item.scenario_id).is_none() {
                return Err(ServiceError::MissingScenario(item.scenario_id.clone()));
            }
            if !truths.contains_key(&item.scenario_id) {
                return Err(ServiceError::MissingTruth(item.scenario_id.clone()));
            }
        }
        std::fs::create_dir_all(&config.data_dir).map_err(io_err(&config.data_dir))?;
        std::fs::create_dir_all(&config.asset_dir).map_err(io_err(&config.asset_dir))?;

        let events_path = config.data_dir.join(EVENTS_FILE);
        let mut sessions = HashMap::new();
        let mut assets = HashMap::new();
        if events_path.exists() {
            let text = std::fs::read_to_string(&events_path).map_err(io_err(&events_path))?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                match serde_json::from_str::<Event>(line) {
                    Ok(Event::Session(s)) => {
                        for a in &s.assignment {
                            assets.insert(a.asset_id.clone(), (a.item(), s.mode));
                        }
                        sessions.insert(
                            s.session_id.clone(),
                            SessionEntry {
                                session: s,
                                answers: Vec::new(),
                            },
                        );
                    }
                    Ok(Event::Answer(a)) => {
                        if let Some(e) = sessions.get_mut(&a.session_id) {
                            e.session.cursor = e.session.cursor.max(a.slot + 1);
                            e.answers.push(a);
                        }
                    }
                    Err(e) => tracing::warn!(error = %e, "skipping unreadable session event"),
                }
            }
        }
        let events = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&events_path)
            .map_err(io_err(&events_path))?;

        let curation_path = config.data_dir.join(CURATION_FILE);
        let mut curation = Vec::new();
        if curation_path.exists() {
            let text = std::fs::read_to_string(&curation_path).map_err(io_err(&curation_path))?;
            curation.extend(text.lines().filter_map(|l| serde_json::from_str(l).ok()));
        }
        let (records, _) = RecordStore::open(config.data_dir.join(RECORDS_FILE))?;

        Ok(Self {
            inner: Arc::new(Inner {
                schema: config.schema,
                manifest: config.manifest,
                truths,
                plan: config.plan,
                asset_root: config.asset_dir,
                data_dir: config.data_dir,
                assets: RwLock::new(assets),
                render_locks: Mutex::new(HashMap::new()),
                sessions: RwLock::new(
                    sessions
                        .into_iter()
                        .map(|(k, v)| (k, Arc::new(tokio::sync::Mutex::new(v))))
                        .collect(),
                ),
                events: Mutex::new(events),
                records,
                curation: Mutex::new(curation),
            }),
            ui_dir: config.ui_dir,
        })
    }

    pub fn router(&self) -> Router {
        let mut router = Router::new()
            .route("/sessions", post(create_session))
            .route("/sessions/{id}", get(get_session))
            .route("/sessions/{id}/next", get(next_item))
            .route("/sessions/{id}/answers", post(submit))
            .route("/assets/{asset_id}", get(get_asset))
            .route("/curation/{scenario_id}", post(add_flag))
            .route("/curation", get(list_flags))
            .route("/export", get(export));
        if let Some(ui) = &self.ui_dir {
            router = router.nest_service("/ui", ServeDir::new(ui).append_index_html_on_directories(true));
        }
        router.with_state(self.inner.clone())
    }

    /// Serves until the listener fails.
    pub async fn serve(self, listener: tokio::net::TcpListener) -> std::io::Result<()> {
        axum::serve(listener, self.router()).await
    }

    /// Human records written so far.
    pub fn records(&self) -> Result<Vec<EvaluationRecord>, StoreError> {
        load_records(self.inner.data_dir.join(RECORDS_FILE))
    }
}

/// JSON error body: `{"error": code, "message": ..., ...extra}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    extra: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            extra: Value::Null,
        }
    }

    fn with(mut self, extra: Value) -> Self {
        self.extra = extra;
        self
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code, "message": self.message});
        if let (Value::Object(extra), Value::Object(b)) = (self.extra, &mut body) {
            b.extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn no_session(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}"))
}

fn session_entry(inner: &Inner, id: &str) -> ApiResult<Arc<tokio::sync::Mutex<SessionEntry>>> {
    inner.sessions.read().unwrap().get(id).cloned().ok_or_else(|| no_session(id))
}

impl Assignment {
    fn item(&self) -> HumanPlanItem {
        HumanPlanItem {
            scenario_id: self.scenario_id.clone(),
            config: self.config,
            phase: self.phase,
        }
    }
}

fn asset_file(mode: HumanMode) -> &'static str {
    match mode {
        HumanMode::Collage => "collage.png",
        HumanMode::Gif => "sequence.gif",
        HumanMode::Video => "clip.gif",
    }
}

/// Renders (or finds on disk) the asset for one item in one mode and
/// returns it with the path of its file.
fn ensure_asset(inner: &Inner, item: &HumanPlanItem, mode: HumanMode) -> Result<(AssetRef, PathBuf), FrameError> {
    let dir = asset_dir(&inner.asset_root, &item.scenario_id, &item.config);
    let file = asset_file(mode);
    let id = asset_id(&item.scenario_id, &item.config, mode.asset_kind(), None);
    // one render per asset at a time; readers wait for the writer
    let lock = inner.render_locks.lock().unwrap().entry(id).or_default().clone();
    let _guard = lock.lock().unwrap();
    let sidecar_path = dir.join(format!("{file}.json"));
    let sidecar: AssetSidecar = match std::fs::read_to_string(&sidecar_path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .filter(|_| dir.join(file).exists())
    {
        Some(s) => s,
        None => {
            let source = inner
                .manifest
                .get(&item.scenario_id)
                .ok_or_else(|| FrameError::Unreadable {
                    path: item.scenario_id.clone(),
                    message: "not in manifest".into(),
                })?;
            let base = inner.manifest.base_dir.as_deref();
            let config = &item.config;
            let asset = match mode {
                HumanMode::Collage => {
                    let seq = sample_frames(source, base, config.interval_ms, config.frame_count)?;
                    render_collage(&item.scenario_id, &seq, config)?.1
                }
                HumanMode::Gif => {
                    let seq = sample_frames(source, base, config.interval_ms, config.frame_count)?;
                    render_gif(&item.scenario_id, &seq, config, config.interval_ms, AssetKind::Gif)?
                }
                HumanMode::Video => {
                    let seq = sample_segment(source, base, config.interval_ms, config.frame_count)?;
                    let delay = (1000.0 / seq.native_fps).round().max(10.0) as u32;
                    render_gif(&item.scenario_id, &seq, config, delay, AssetKind::Clip)?
                }
            };
            write_asset(&dir, &asset)?;
            asset.sidecar
        }
    };
    debug_assert_eq!(sidecar.kind, mode.asset_kind());
    let asset = AssetRef {
        url: format!("/assets/{}", sidecar.asset_id),
        asset_id: sidecar.asset_id,
        kind: sidecar.kind,
        mime: sidecar.mime,
        width: sidecar.width,
        height: sidecar.height,
        frame_delay_ms: sidecar.frame_delay_ms,
    };
    Ok((asset, dir.join(file)))
}

async fn render(inner: &Arc<Inner>, item: HumanPlanItem, mode: HumanMode) -> ApiResult<(AssetRef, PathBuf)> {
    let worker = inner.clone();
    let scenario = item.scenario_id.clone();
    tokio::task::spawn_blocking(move || ensure_asset(&worker, &item, mode))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "asset_failed",
                format!("cannot render {} for {scenario}: {e}", mode.as_str()),
            )
        })
}

/// The plan in the order a session with `seed` sees it.
pub fn assignment_order(plan: &HumanPlan, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..plan.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

fn default_seed(evaluator_id: &str) -> u64 {
    let d = Sha256::digest(evaluator_id.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    evaluator_id: String,
    mode: HumanMode,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct SessionView {
    session_id: String,
    evaluator_id: String,
    mode: HumanMode,
    seed: u64,
    total: usize,
    cursor: usize,
    complete: bool,
    created_at: String,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        Self {
            session_id: s.session_id.clone(),
            evaluator_id: s.evaluator_id.clone(),
            mode: s.mode,
            seed: s.seed,
            total: s.assignment.len(),
            cursor: s.cursor,
            complete: s.cursor >= s.assignment.len(),
            created_at: s.created_at.clone(),
        }
    }
}

async fn create_session(
    State(inner): State<Arc<Inner>>,
    Json(req): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let evaluator_id = req.evaluator_id.trim().to_string();
    if evaluator_id.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", "evaluator_id is empty"));
    }
    let seed = req.seed.unwrap_or_else(|| default_seed(&evaluator_id));
    let mode = req.mode;
    let assignment: Vec<Assignment> = assignment_order(&inner.plan, seed)
        .into_iter()
        .map(|i| {
            let item = &inner.plan.items[i];
            Assignment {
                scenario_id: item.scenario_id.clone(),
                config: item.config,
                phase: item.phase,
                asset_id: asset_id(&item.scenario_id, &item.config, mode.asset_kind(), None),
            }
        })
        .collect();
    {
        let mut assets = inner.assets.write().unwrap();
        for a in &assignment {
            assets.insert(a.asset_id.clone(), (a.item(), mode));
        }
    }

    let session = Session {
        session_id: uuid::Uuid::new_v4().to_string(),
        evaluator_id,
        mode,
        seed,
        assignment,
        cursor: 0,
        created_at: now_rfc3339(),
    };
    append_line(&inner.events, &inner.data_dir.join(EVENTS_FILE), &Event::Session(session.clone()))
        .map_err(ApiError::internal)?;
    let view = SessionView::from(&session);
    // warm the cache in session order so evaluators rarely wait on a render
    let items: Vec<HumanPlanItem> = session.assignment.iter().map(Assignment::item).collect();
    let worker = inner.clone();
    tokio::task::spawn_blocking(move || {
        for item in items {
            if let Err(e) = ensure_asset(&worker, &item, mode) {
                tracing::warn!(scenario = %item.scenario_id, error = %e, "pre-render failed");
            }
        }
    });
    inner.sessions.write().unwrap().insert(
        session.session_id.clone(),
        Arc::new(tokio::sync::Mutex::new(SessionEntry {
            session,
            answers: Vec::new(),
        })),
    );
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(inner): State<Arc<Inner>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionView>> {
    let entry = session_entry(&inner, &id)?;
    let e = entry.lock().await;
    Ok(Json(SessionView::from(&e.session)))
}

fn questions(schema: &AnnotationSchema) -> Value {
    Value::Array(
        schema
            .categories()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                json!({
                    "index": i + 1,
                    "category": c.name,
                    "question": c.question,
                    "options": c.options().iter().map(|(l, label)| json!({"letter": l.to_string(), "label": label})).collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

async fn next_item(State(inner): State<Arc<Inner>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let entry = session_entry(&inner, &id)?;
    let e = entry.lock().await;
    let s = &e.session;
    let total = s.assignment.len();
    let Some(a) = s.assignment.get(s.cursor) else {
        return Ok(Json(json!({
            "status": "complete",
            "session_id": s.session_id,
            "total": total,
            "submitted": e.answers.len(),
        })));
    };
    let (asset, _) = render(&inner, a.item(), s.mode).await?;
    Ok(Json(json!({
        "status": "item",
        "session_id": s.session_id,
        "position": s.cursor + 1,
        "total": total,
        "scenario_id": a.scenario_id,
        "mode": s.mode,
        "asset": asset,
        "interval_ms": a.config.interval_ms,
        "frame_count": a.config.frame_count,
        "grid": format!("{}x{}", a.config.grid.rows, a.config.grid.cols),
        "questions": questions(&inner.schema),
    })))
}

#[derive(Debug, Deserialize)]
struct AnswerRequest {
    scenario_id: String,
    key: String,
    #[serde(default)]
    view_duration_s: f64,
    #[serde(default)]
    flags: Vec<FlagInput>,
}

fn key_error(e: &KeyError, schema: &AnnotationSchema) -> ApiError {
    let position = e.position();
    let category = position
        .and_then(|p| schema.categories().get(p - 1))
        .map(|c| c.name.clone());
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_key", e.to_string()).with(json!({
        "position": position,
        "category": category,
        "expected_length": schema.len(),
    }))
}

async fn submit(
    State(inner): State<Arc<Inner>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<AnswerRequest>,
) -> ApiResult<Json<Value>> {
    let key: AnswerKey = req.key.trim().parse().map_err(|e| key_error(&e, &inner.schema))?;
    validate_key(&key, &inner.schema).map_err(|e| key_error(&e, &inner.schema))?;
    if !(req.view_duration_s.is_finite() && req.view_duration_s >= 0.0) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", "view_duration_s must be a non-negative number"));
    }
    let entry = session_entry(&inner, &id)?;
    let mut e = entry.lock().await;
    let total = e.session.assignment.len();
    let current = e.session.assignment.get(e.session.cursor).map(|a| a.scenario_id.clone());

    if current.as_deref() != Some(req.scenario_id.as_str()) {
        // a repeat of an earlier answer, or a stale page
        return match e.answers.iter().rev().find(|a| a.scenario_id == req.scenario_id) {
            Some(prev) if prev.key == key => Ok(Json(json!({
                "status": "duplicate",
                "position": prev.slot + 1,
                "cursor": e.session.cursor,
                "total": total,
                "complete": e.session.cursor >= total,
            }))),
            Some(prev) => Err(ApiError::new(
                StatusCode::CONFLICT,
                "conflict",
                format!("item {} was already answered with a different key", prev.slot + 1),
            )
            .with(json!({"stored_key": prev.key.to_string(), "position": prev.slot + 1}))),
            None => Err(ApiError::new(
                StatusCode::CONFLICT,
                "stale",
                match &current {
                    Some(c) => format!("the current item is scenario {c}"),
                    None => "the session is complete".to_string(),
                },
            )),
        };
    }

    let slot = e.session.cursor;
    let assignment = e.session.assignment[slot].clone();
    let now = now_rfc3339();
    let answer = SubmittedAnswer {
        session_id: e.session.session_id.clone(),
        slot,
        scenario_id: req.scenario_id.clone(),
        key: key.clone(),
        view_duration_s: req.view_duration_s,
        flags: req.flags.clone(),
        submitted_at: now.clone(),
    };
    let truth = inner.truths[&assignment.scenario_id].clone();
    let mut config = assignment.config;
    config.mode = PresentationMode::Collage;
    let record = EvaluationRecord {
        record_id: format!("h/{}/{}", e.session.session_id, slot),
        scenario_id: assignment.scenario_id.clone(),
        model_id: None,
        evaluator_id: Some(e.session.evaluator_id.clone()),
        presentation: e.session.mode.as_str().to_string(),
        config,
        predicted: ParsedResponse::parsed(key.clone(), req.key.trim()),
        truth,
        latency_s: req.view_duration_s,
        timestamp: now.clone(),
        phase: assignment.phase,
        draw_index: slot as u32,
        transport: crate::gateway::TransportStatus::Ok,
        attempts: 1,
        prompt_sha256: None,
    };
    append_line(&inner.events, &inner.data_dir.join(EVENTS_FILE), &Event::Answer(answer.clone()))
        .map_err(ApiError::internal)?;
    inner.records.append(&record).map_err(ApiError::internal)?;
    for f in &req.flags {
        store_flag(
            &inner,
            CurationFlag {
                scenario_id: assignment.scenario_id.clone(),
                evaluator_id: Some(e.session.evaluator_id.clone()),
                verdict: f.verdict.clone(),
                note: f.note.clone(),
                created_at: Some(now.clone()),
            },
        )
        .map_err(ApiError::internal)?;
    }
    e.answers.push(answer);
    e.session.cursor += 1;
    Ok(Json(json!({
        "status": "accepted",
        "position": slot + 1,
        "cursor": e.session.cursor,
        "total": total,
        "complete": e.session.cursor >= total,
    })))
}

async fn get_asset(State(inner): State<Arc<Inner>>, UrlPath(asset_id): UrlPath<String>) -> ApiResult<Response> {
    let found = inner.assets.read().unwrap().get(&asset_id).cloned();
    let (item, mode) = found.ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_asset", format!("no asset {asset_id}")))?;
    let (asset, path) = render(&inner, item, mode).await?;
    let mime = asset.mime;
    let bytes = tokio::fs::read(&path).await.map_err(ApiError::internal)?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_str(&mime).map_err(ApiError::internal)?);
    headers.insert(header::CACHE_CONTROL, HeaderValue::from_static("public, max-age=86400, immutable"));
    Ok((headers, bytes).into_response())
}

fn store_flag(inner: &Inner, flag: CurationFlag) -> Result<(), ServiceError> {
    let path = inner.data_dir.join(CURATION_FILE);
    let mut line = serde_json::to_string(&flag).expect("flag serializes");
    line.push('\n');
    let mut flags = inner.curation.lock().unwrap();
    let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
    f.write_all(line.as_bytes()).map_err(io_err(&path))?;
    flags.push(flag);
    Ok(())
}

#[derive(Debug, Deserialize)]
struct FlagRequest {
    verdict: String,
    #[serde(default)]
    note: String,
    #[serde(default)]
    evaluator_id: Option<String>,
}

async fn add_flag(
    State(inner): State<Arc<Inner>>,
    UrlPath(scenario_id): UrlPath<String>,
    Json(req): Json<FlagRequest>,
) -> ApiResult<(StatusCode, Json<CurationFlag>)> {
    if inner.manifest.get(&scenario_id).is_none() && !inner.truths.contains_key(&scenario_id) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_scenario", format!("no scenario {scenario_id}")));
    }
    if req.verdict.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", "verdict is empty"));
    }
    let flag = CurationFlag {
        scenario_id,
        evaluator_id: req.evaluator_id,
        verdict: req.verdict.trim().to_string(),
        note: req.note,
        created_at: Some(now_rfc3339()),
    };
    store_flag(&inner, flag.clone()).map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(flag)))
}

async fn list_flags(State(inner): State<Arc<Inner>>) -> Json<Value> {
    let flags = inner.curation.lock().unwrap().clone();
    let mut truths: Vec<GroundTruth> = inner.truths.values().cloned().collect();
    truths.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    Json(json!({
        "flags": flags,
        "disputed": disputed(&truths, &flags),
    }))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: Option<String>,
}

/// Human records as JSONL (one record per line, same shape as model
/// records). The export manifest travels in `x-export-*` headers, or as a
/// `manifest` object with `?format=json`.
async fn export(State(inner): State<Arc<Inner>>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let records = inner.records.records().map_err(ApiError::internal)?;
    let evaluators: std::collections::BTreeSet<&str> = records.iter().map(|r| r.subject()).collect();
    let manifest = json!({
        "schema_id": inner.schema.schema_id,
        "records": records.len(),
        "evaluators": evaluators,
        "plan_items": inner.plan.len(),
        "generated_at": now_rfc3339(),
    });
    if q.format.as_deref() == Some("json") {
        return Ok(Json(json!({"manifest": manifest, "records": records})).into_response());
    }
    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r).expect("record serializes"));
        body.push('\n');
    }
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/x-ndjson"));
    let h = |v: String| HeaderValue::from_str(&v).map_err(ApiError::internal);
    headers.insert("x-export-records", h(records.len().to_string())?);
    headers.insert("x-export-schema", h(inner.schema.schema_id.clone())?);
    headers.insert("x-export-evaluators", h(evaluators.len().to_string())?);
    headers.insert("x-export-generated-at", h(manifest["generated_at"].as_str().unwrap_or("").to_string())?);
    Ok((headers, body).into_response())
}
