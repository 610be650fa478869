//! HTTP session service: upload a dataset once, then iterate on value choices and sweeps.
//!
//! Every session holds one dataset, at most one configuration and the latest sweep result.
//! Results are stamped with the digest of the configuration that produced them; replacing
//! the configuration leaves the old result in place but marks it stale.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use fairfront::digest::sha256_hex;
use fairfront::{
    evaluate_rule, parse_config_str, parse_dataset, Dataset, DatasetSchema, DecisionRule, Error,
    RuleRecord, SweepDocument, SweepOptions, SweepResult, ValueConfig, DEFAULT_SWEEP_CAP,
};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

mod error;

pub use error::{ApiError, ErrorBody};

type ApiResult<T> = Result<T, ApiError>;

/// Tolerance when matching requested thresholds against grid values.
pub const RULE_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Sessions idle for longer than this are dropped.
    pub ttl: Duration,
    /// Directory for JSON session snapshots; sessions found there are restored on start.
    pub persist_dir: Option<PathBuf>,
    pub max_upload_bytes: usize,
    pub sweep_cap: u64,
    /// Allowed browser origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            ttl: Duration::from_secs(6 * 3600),
            persist_dir: None,
            max_upload_bytes: 64 * 1024 * 1024,
            sweep_cap: DEFAULT_SWEEP_CAP,
            cors_origin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum RunState {
    Idle,
    Sweeping,
    Ready,
    Failed(ErrorBody),
}

struct Session {
    id: String,
    created_at: u64,
    last_access: Instant,
    dataset: Arc<Dataset>,
    dataset_digest: String,
    schema: DatasetSchema,
    config: Option<ValueConfig>,
    state: RunState,
    result: Option<Arc<SweepResult>>,
    progress: Arc<AtomicUsize>,
    total: usize,
    started_at: Option<u64>,
    finished_at: Option<u64>,
    selection: Option<Value>,
}

/// On-disk form of a session.
#[derive(Serialize, Deserialize)]
struct Snapshot {
    id: String,
    created_at: u64,
    dataset: Dataset,
    dataset_digest: String,
    schema: DatasetSchema,
    config: Option<Value>,
    result: Option<SweepResult>,
    started_at: Option<u64>,
    finished_at: Option<u64>,
    selection: Option<Value>,
}

impl Session {
    fn stale(&self) -> bool {
        match (&self.result, &self.config) {
            (Some(r), Some(c)) => r.config_digest != c.digest(),
            (Some(_), None) => true,
            _ => false,
        }
    }

    fn status_name(&self) -> &'static str {
        match self.state {
            RunState::Idle => "idle",
            RunState::Sweeping => "sweeping",
            RunState::Ready => "ready",
            RunState::Failed(_) => "error",
        }
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            id: self.id.clone(),
            created_at: self.created_at,
            dataset: (*self.dataset).clone(),
            dataset_digest: self.dataset_digest.clone(),
            schema: self.schema.clone(),
            config: self
                .config
                .as_ref()
                .map(|c| serde_json::from_str(&c.to_canonical_json()).expect("canonical json")),
            result: self.result.as_deref().cloned(),
            started_at: self.started_at,
            finished_at: self.finished_at,
            selection: self.selection.clone(),
        }
    }

    fn restore(s: Snapshot) -> Result<Self, String> {
        let config = s
            .config
            .map(|v| parse_config_str(&v.to_string()))
            .transpose()
            .map_err(|e| e.to_string())?;
        let total = s.result.as_ref().map_or(0, |r| r.len());
        Ok(Session {
            id: s.id,
            created_at: s.created_at,
            last_access: Instant::now(),
            dataset: Arc::new(s.dataset),
            dataset_digest: s.dataset_digest,
            schema: s.schema,
            config,
            // an interrupted sweep comes back idle
            state: if s.result.is_some() {
                RunState::Ready
            } else {
                RunState::Idle
            },
            result: s.result.map(Arc::new),
            progress: Arc::new(AtomicUsize::new(total)),
            total,
            started_at: s.started_at,
            finished_at: s.finished_at,
            selection: s.selection,
        })
    }

    /// The result, if it is current.
    fn current_result(&self) -> ApiResult<Arc<SweepResult>> {
        if self.state == RunState::Sweeping {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "SweepInProgress",
                "a sweep is running",
                Value::Null,
            ));
        }
        let Some(result) = &self.result else {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "NotReady",
                "no sweep result yet",
                json!({ "status": self.status_name() }),
            ));
        };
        if self.stale() {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "StaleResult",
                "the configuration changed since the last sweep",
                json!({
                    "result_digest": result.config_digest,
                    "config_digest": self.config.as_ref().map(|c| c.digest()),
                }),
            ));
        }
        Ok(result.clone())
    }

    /// Index of the grid rule named by `key`: an index or rule syntax.
    fn find_rule(&self, result: &SweepResult, key: &str) -> ApiResult<usize> {
        let not_found = || {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "UnknownRule",
                format!("no rule {key:?} in the sweep"),
                json!({ "key": key }),
            )
        };
        if let Ok(i) = key.parse::<usize>() {
            return if i < result.len() { Ok(i) } else { Err(not_found()) };
        }
        let rule: DecisionRule = key
            .parse()
            .map_err(|e: Error| ApiError::core(StatusCode::BAD_REQUEST, &e))?;
        let wanted = match rule.thresholds_for(&self.dataset) {
            Ok(t) => t,
            Err(Error::UnknownGroup(_)) | Err(Error::ThresholdOutOfRange(_)) => return Err(not_found()),
            Err(e) => return Err(ApiError::core(StatusCode::BAD_REQUEST, &e)),
        };
        (0..result.len())
            .find(|&i| {
                result
                    .thresholds(i)
                    .iter()
                    .zip(&wanted)
                    .all(|(a, b)| (a - b).abs() <= RULE_MATCH_TOLERANCE)
            })
            .ok_or_else(not_found)
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

struct Inner {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Creates the state, restoring any snapshots in the persistence directory.
    pub fn new(config: ServiceConfig) -> std::io::Result<Self> {
        let mut sessions = HashMap::new();
        if let Some(dir) = &config.persist_dir {
            std::fs::create_dir_all(dir)?;
            for entry in std::fs::read_dir(dir)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    match load_snapshot(&path) {
                        Ok(s) => {
                            sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
                        }
                        Err(e) => eprintln!("skipping snapshot {}: {e}", path.display()),
                    }
                }
            }
        }
        Ok(AppState(Arc::new(Inner {
            config,
            sessions: Mutex::new(sessions),
        })))
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.lock().len()
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        let s = self
            .0
            .sessions
            .lock()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))?;
        s.lock().last_access = Instant::now();
        Ok(s)
    }

    fn snapshot_path(&self, id: &str) -> Option<PathBuf> {
        self.0.config.persist_dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    fn persist(&self, session: &Session) {
        let Some(path) = self.snapshot_path(&session.id) else {
            return;
        };
        let tmp = path.with_extension("json.tmp");
        let written = serde_json::to_vec(&session.snapshot())
            .map_err(std::io::Error::from)
            .and_then(|bytes| std::fs::write(&tmp, bytes))
            .and_then(|_| std::fs::rename(&tmp, &path));
        if let Err(e) = written {
            eprintln!("failed to persist session {}: {e}", session.id);
        }
    }

    /// Drops sessions idle for longer than the TTL, except those sweeping. Returns how many.
    pub fn evict_expired(&self) -> usize {
        self.evict_idle_since(Instant::now())
    }

    fn evict_idle_since(&self, now: Instant) -> usize {
        let ttl = self.0.config.ttl;
        let mut sessions = self.0.sessions.lock();
        let expired: Vec<String> = sessions
            .iter()
            .filter(|(_, s)| {
                let s = s.lock();
                s.state != RunState::Sweeping && now.saturating_duration_since(s.last_access) >= ttl
            })
            .map(|(id, _)| id.clone())
            .collect();
        for id in &expired {
            sessions.remove(id);
            if let Some(p) = self.snapshot_path(id) {
                let _ = std::fs::remove_file(p);
            }
        }
        expired.len()
    }

    /// Periodically evicts expired sessions; runs until the runtime shuts down.
    pub async fn eviction_loop(self) {
        let period = (self.0.config.ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(300));
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            self.evict_expired();
        }
    }
}

fn load_snapshot(path: &Path) -> Result<Session, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    let snap: Snapshot = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
    Session::restore(snap)
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_methods(Any)
        .allow_headers(Any)
        .allow_origin(match &state.0.config.cors_origin {
            Some(o) => match HeaderValue::from_str(o) {
                Ok(v) => AllowOrigin::exact(v),
                Err(_) => AllowOrigin::any(),
            },
            None => AllowOrigin::any(),
        });
    let limit = state.0.config.max_upload_bytes;
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/config", put(put_config))
        .route("/sessions/{id}/sweep", post(run_sweep))
        .route("/sessions/{id}/status", get(status))
        .route("/sessions/{id}/pareto", get(pareto))
        .route("/sessions/{id}/rules/{key}", get(rule_detail))
        .route("/sessions/{id}/selection", post(select))
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .with_state(state)
}

#[derive(Deserialize)]
struct UploadParams {
    #[serde(default = "default_score")]
    score: String,
    #[serde(default = "default_group")]
    group: String,
    #[serde(default = "default_outcome")]
    outcome: String,
    amount: Option<String>,
    id: Option<String>,
}

fn default_score() -> String {
    "score".into()
}
fn default_group() -> String {
    "group".into()
}
fn default_outcome() -> String {
    "outcome".into()
}

fn body_error(e: BytesRejection) -> ApiError {
    let status = e.status();
    let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
        "PayloadTooLarge"
    } else {
        "BadBody"
    };
    ApiError::new(status, code, e.body_text(), Value::Null)
}

/// `POST /sessions?score=&group=&outcome=&amount=&id=` with the raw CSV as body.
async fn create_session(
    State(state): State<AppState>,
    params: Result<Query<UploadParams>, QueryRejection>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let body = body.map_err(body_error)?;
    let Query(p) = params.map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "BadQuery", e.body_text(), Value::Null)
    })?;
    let schema = DatasetSchema {
        score_column: p.score,
        group_column: p.group,
        outcome_column: p.outcome,
        amount_column: p.amount,
        id_column: p.id,
        attribute_columns: Vec::new(),
        // claims predicates may name any other column
        include_other_columns: true,
    };
    let dataset = parse_dataset(&body[..], &schema).map_err(|e| ApiError::core(StatusCode::BAD_REQUEST, &e))?;
    let session = Session {
        id: uuid::Uuid::new_v4().simple().to_string(),
        created_at: now_ms(),
        last_access: Instant::now(),
        dataset_digest: sha256_hex(&body),
        dataset: Arc::new(dataset),
        schema,
        config: None,
        state: RunState::Idle,
        result: None,
        progress: Arc::new(AtomicUsize::new(0)),
        total: 0,
        started_at: None,
        finished_at: None,
        selection: None,
    };
    let reply = json!({
        "id": session.id,
        "status": session.status_name(),
        "individuals": session.dataset.len(),
        "groups": session.dataset.groups(),
        "dataset_digest": session.dataset_digest,
    });
    state.persist(&session);
    state
        .0
        .sessions
        .lock()
        .insert(session.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(reply)))
}

fn check_config(config: &ValueConfig, session: &Session) -> Result<(), Error> {
    if config.positions != session.schema.group_column {
        return Err(Error::SchemaViolation {
            path: "/positions".into(),
            reason: format!(
                "the uploaded dataset groups by column {:?}",
                session.schema.group_column
            ),
        });
    }
    if let Some(a) = config.analysis.claims.attribute() {
        if session.dataset.individuals().iter().any(|i| !i.attributes.contains_key(a)) {
            return Err(Error::UnknownAttribute(a.to_string()));
        }
    }
    config.analysis.pattern.validate_for(session.dataset.groups().len())?;
    match config.validate_against(&session.dataset) {
        // reported when a sweep is requested
        Err(Error::EmptyPosition(_)) => Ok(()),
        other => other,
    }
}

/// `PUT /sessions/{id}/config` with a value-configuration document.
async fn put_config(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<Value>> {
    let body = body.map_err(body_error)?;
    let session = state.session(&id)?;
    let text = std::str::from_utf8(&body).map_err(|_| {
        ApiError::new(StatusCode::BAD_REQUEST, "BadBody", "body is not UTF-8", Value::Null)
    })?;
    let config = parse_config_str(text).map_err(|e| ApiError::core(StatusCode::UNPROCESSABLE_ENTITY, &e))?;
    let mut s = session.lock();
    if s.state == RunState::Sweeping {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "SweepInProgress",
            "cannot replace the configuration while a sweep is running",
            Value::Null,
        ));
    }
    check_config(&config, &s).map_err(|e| ApiError::core(StatusCode::UNPROCESSABLE_ENTITY, &e))?;
    let digest = config.digest();
    s.config = Some(config);
    state.persist(&s);
    Ok(Json(json!({
        "status": s.status_name(),
        "config_digest": digest,
        "stale": s.stale(),
    })))
}

/// `POST /sessions/{id}/sweep`: starts a background sweep and returns 202.
async fn run_sweep(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let session = state.session(&id)?;
    let (dataset, config, progress, total) = {
        let mut s = session.lock();
        if s.state == RunState::Sweeping {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "SweepInProgress",
                "a sweep is already running",
                Value::Null,
            ));
        }
        let Some(config) = s.config.clone() else {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "NoConfig",
                "upload a configuration first",
                Value::Null,
            ));
        };
        let unprocessable = |e: Error| ApiError::core(StatusCode::UNPROCESSABLE_ENTITY, &e);
        config.validate_against(&s.dataset).map_err(unprocessable)?;
        let size = config.threshold_grid(&s.dataset).map_err(unprocessable)?.size();
        let cap = state.0.config.sweep_cap;
        if size > cap as u128 {
            return Err(unprocessable(Error::SweepTooLarge { size, cap }));
        }
        s.state = RunState::Sweeping;
        s.progress = Arc::new(AtomicUsize::new(0));
        s.total = size as usize;
        s.started_at = Some(now_ms());
        s.finished_at = None;
        (s.dataset.clone(), config, s.progress.clone(), s.total)
    };

    let cap = state.0.config.sweep_cap;
    let worker_state = state.clone();
    let worker_session = session.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = config.run(
            &dataset,
            SweepOptions {
                cap,
                progress: Some(&progress),
            },
        );
        let mut s = worker_session.lock();
        s.finished_at = Some(now_ms());
        match outcome {
            Ok(result) => {
                s.result = Some(Arc::new(result));
                s.state = RunState::Ready;
            }
            Err(e) => s.state = RunState::Failed(error::body_of(&e)),
        }
        worker_state.persist(&s);
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "status": "sweeping", "total": total })),
    ))
}

/// `GET /sessions/{id}/status`
async fn status(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let session = state.session(&id)?;
    let s = session.lock();
    let completed = s.progress.load(Ordering::SeqCst).min(s.total);
    let progress = match s.state {
        RunState::Ready => 1.0,
        _ if s.total == 0 => 0.0,
        _ => completed as f64 / s.total as f64,
    };
    let result = s.result.as_deref();
    Ok(Json(json!({
        "id": s.id,
        "status": s.status_name(),
        "progress": progress,
        "completed": completed,
        "total": s.total,
        "config_digest": s.config.as_ref().map(|c| c.digest()),
        "result_digest": result.map(|r| r.config_digest.clone()),
        "stale": s.stale(),
        "size": result.map(|r| r.len()),
        "front_size": result.map(|r| r.front_size()),
        "viable_size": result.map(|r| r.evaluated.iter().filter(|e| e.viable).count()),
        "error": match &s.state {
            RunState::Failed(b) => serde_json::to_value(b).expect("error body"),
            _ => Value::Null,
        },
        "individuals": s.dataset.len(),
        "groups": s.dataset.groups(),
        "dataset_digest": s.dataset_digest,
        "created_at": s.created_at,
        "sweep_started_at": s.started_at,
        "sweep_finished_at": s.finished_at,
        "has_selection": s.selection.is_some(),
    })))
}

#[derive(Deserialize)]
struct ParetoParams {
    #[serde(default)]
    viable_only: bool,
    #[serde(default)]
    front_only: bool,
}

/// `GET /sessions/{id}/pareto?viable_only=&front_only=`
async fn pareto(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    params: Result<Query<ParetoParams>, QueryRejection>,
) -> ApiResult<Json<SweepDocument>> {
    let Query(p) = params.map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "BadQuery", e.body_text(), Value::Null)
    })?;
    let session = state.session(&id)?;
    let result = session.lock().current_result()?;
    let doc = SweepDocument::from_result(&result, p.viable_only, p.front_only)
        .map_err(|e| ApiError::core(StatusCode::UNPROCESSABLE_ENTITY, &e))?;
    Ok(Json(doc))
}

fn detail_record(s: &Session, result: &SweepResult, index: usize) -> ApiResult<RuleRecord> {
    let config = s.config.as_ref().expect("current result implies a config");
    let detail = evaluate_rule(&s.dataset, &result.evaluated[index].rule, &config.analysis)
        .map_err(|e| ApiError::core(StatusCode::UNPROCESSABLE_ENTITY, &e))?;
    Ok(RuleRecord::new(&detail).in_sweep(result, index))
}

/// `GET /sessions/{id}/rules/{key}`: `key` is a sweep index or rule syntax such as `g:F=0.6,M=0.8`.
async fn rule_detail(
    State(state): State<AppState>,
    UrlPath((id, key)): UrlPath<(String, String)>,
) -> ApiResult<Json<RuleRecord>> {
    let session = state.session(&id)?;
    let s = session.lock();
    let result = s.current_result()?;
    let index = s.find_rule(&result, &key)?;
    Ok(Json(detail_record(&s, &result, index)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectionRequest {
    index: Option<usize>,
    rule: Option<String>,
}

/// `POST /sessions/{id}/selection` with `{"index": n}` or `{"rule": "<syntax>"}`.
///
/// Stores the chosen rule and returns a self-contained decision record.
async fn select(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<Value>> {
    let body = body.map_err(body_error)?;
    let req: SelectionRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "BadBody", e.to_string(), Value::Null)
    })?;
    let key = match (req.index, req.rule) {
        (Some(i), None) => i.to_string(),
        (None, Some(r)) => r,
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "BadBody",
                "give exactly one of \"index\" or \"rule\"",
                Value::Null,
            ))
        }
    };
    let session = state.session(&id)?;
    let mut s = session.lock();
    let result = s.current_result()?;
    let index = s.find_rule(&result, &key)?;
    let record = detail_record(&s, &result, index)?;
    let config = s.config.as_ref().expect("current result implies a config");
    let decision = json!({
        "session_id": s.id,
        "selected_at": now_ms(),
        "dataset": {
            "digest": s.dataset_digest,
            "individuals": s.dataset.len(),
            "groups": s.dataset.groups(),
            "columns": s.schema,
        },
        "config": serde_json::from_str::<Value>(&config.to_canonical_json()).expect("canonical json"),
        "config_digest": config.digest(),
        "rule": result.evaluated[index].rule.to_string(),
        "record": record,
    });
    s.selection = Some(decision.clone());
    state.persist(&s);
    Ok(Json(decision))
}
