//! HTTP/JSON API over budget sessions and uploaded datasets.
//!
//! Each session sits behind its own mutex, so queries on one session run one
//! at a time while distinct sessions proceed in parallel. Every mutation is
//! applied to a copy, written to disk, and only then made visible.

use std::collections::HashMap;
use std::io;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{Mutex, RwLock};

use dptopk_core::accountant::{BudgetSession, LogEntry, QueryOutcome};
use dptopk_core::noise::SeededRng;
use dptopk_core::{DomainConfig, Error as CoreError, Histogram, Mechanism, SensitivitySetting, TopKRequest};

use crate::io::{ingest_csv, parse_json_histogram};
use crate::store::Store;

/// Pins the RNG seed of a query. Honoured only in test mode.
pub const SEED_HEADER: &str = "x-dptopk-seed";

/// Session ids stay below 2^53 so JSON clients read them exactly.
const MAX_SESSION_ID: u64 = 1 << 53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Validation,
    BudgetRejected,
    NotFound,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    fn validation(m: impl Into<String>) -> Self {
        Self { code: ErrorCode::Validation, message: m.into() }
    }

    fn not_found(m: impl Into<String>) -> Self {
        Self { code: ErrorCode::NotFound, message: m.into() }
    }

    fn status(&self) -> StatusCode {
        match self.code {
            ErrorCode::Validation => StatusCode::BAD_REQUEST,
            ErrorCode::BudgetRejected => StatusCode::OK,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<io::Error> for ApiError {
    fn from(e: io::Error) -> Self {
        Self { code: ErrorCode::Internal, message: format!("storage error: {e}") }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Inner {
    store: Store,
    test_mode: bool,
    domain: DomainConfig,
    sessions: RwLock<HashMap<u64, Arc<Mutex<BudgetSession>>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Opens `store` and loads the sessions already persisted there.
    pub fn load(store: Store, test_mode: bool) -> io::Result<Self> {
        let sessions = store
            .load_sessions()?
            .into_iter()
            .map(|s| (s.session_id, Arc::new(Mutex::new(s))))
            .collect();
        Ok(Self(Arc::new(Inner { store, test_mode, domain: DomainConfig::default(), sessions: RwLock::new(sessions) })))
    }

    async fn session(&self, raw_id: &str) -> ApiResult<Arc<Mutex<BudgetSession>>> {
        let id: Option<u64> = raw_id.parse().ok();
        let map = self.0.sessions.read().await;
        id.and_then(|id| map.get(&id).cloned())
            .ok_or_else(|| ApiError::not_found(format!("no session {raw_id:?}")))
    }

    fn rng(&self, headers: &HeaderMap) -> ApiResult<SeededRng> {
        match headers.get(SEED_HEADER).filter(|_| self.0.test_mode) {
            Some(v) => {
                let seed = v
                    .to_str()
                    .ok()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| ApiError::validation(format!("{SEED_HEADER} must be an unsigned integer")))?;
                Ok(SeededRng::new(seed))
            }
            None => Ok(SeededRng::new(rand::random())),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/query", post(query_session))
        .route("/v1/sessions/{id}/close", post(close_session))
        .route("/v1/datasets", post(upload_dataset))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> io::Result<()> {
    axum::serve(listener, router(state)).await
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

/// `{eps_max, delta_total}` of a session.
pub fn privacy_json(s: &BudgetSession) -> dptopk_core::Result<Value> {
    let p = s.privacy()?;
    Ok(json!({ "eps_max": p.eps_total, "delta_total": p.delta_total }))
}

pub fn budget_json(s: &BudgetSession) -> Value {
    json!({ "kmax_remaining": s.kmax_remaining, "ellmax_remaining": s.ellmax_remaining })
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub session_id: u64,
    pub privacy: Value,
    pub spent: u64,
    pub queries: u64,
    pub kmax_initial: u64,
    pub kmax_remaining: u64,
    pub ellmax_initial: u64,
    pub ellmax_remaining: u64,
    pub closed: bool,
    pub log: Vec<LogEntry>,
}

/// Report plus log, as served by `GET /v1/sessions/{id}`.
pub fn session_view(s: &BudgetSession) -> dptopk_core::Result<SessionView> {
    let r = s.report()?;
    Ok(SessionView {
        session_id: r.session_id,
        privacy: privacy_json(s)?,
        spent: r.spent,
        queries: r.queries,
        kmax_initial: r.kmax_initial,
        kmax_remaining: r.kmax_remaining,
        ellmax_initial: r.ellmax_initial,
        ellmax_remaining: r.ellmax_remaining,
        closed: r.closed,
        log: s.log.clone(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    kmax: u64,
    ellmax: u64,
    eps: f64,
    delta: f64,
    #[serde(default)]
    delta_prime: f64,
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let b: CreateBody = parse_body(&body)?;
    let mut map = st.0.sessions.write().await;
    let id = loop {
        let id = rand::random_range(1..MAX_SESSION_ID);
        if !map.contains_key(&id) {
            break id;
        }
    };
    let s = BudgetSession::create(id, b.kmax, b.ellmax, b.eps, b.delta, b.delta_prime)?;
    let privacy = privacy_json(&s)?;
    st.0.store.save_session(&s)?;
    map.insert(id, Arc::new(Mutex::new(s)));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id, "privacy": privacy }))))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let s = st.session(&id).await?;
    let s = s.lock().await;
    Ok(Json(session_view(&s)?))
}

async fn close_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let s = st.session(&id).await?;
    let mut s = s.lock().await;
    if !s.closed {
        let mut next = s.clone();
        next.close();
        st.0.store.save_session(&next)?;
        *s = next;
    }
    Ok(Json(session_view(&s)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryBody {
    histogram: Option<Value>,
    dataset_ref: Option<String>,
    k: usize,
    kbar: usize,
    #[serde(default)]
    mechanism: Mechanism,
    #[serde(default)]
    sensitivity: SensitivitySetting,
}

fn query_histogram(st: &AppState, b: &QueryBody) -> ApiResult<Histogram> {
    match (&b.histogram, &b.dataset_ref) {
        (Some(h), None) => parse_json_histogram(&h.to_string()).map_err(|e| ApiError::validation(e.to_string())),
        (None, Some(id)) => {
            st.0.store.load_dataset(id)?.ok_or_else(|| ApiError::not_found(format!("no dataset {id:?}")))
        }
        _ => Err(ApiError::validation("give exactly one of histogram or dataset_ref")),
    }
}

async fn query_session(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let b: QueryBody = parse_body(&body)?;
    let session = st.session(&id).await?;
    let req = TopKRequest::new(b.k, b.kbar, b.mechanism)?;
    let h = query_histogram(&st, &b)?;
    let mut rng = st.rng(&headers)?;

    let mut s = session.lock().await;
    let mut next = s.clone();
    match next.query(&h, &req, b.sensitivity, &st.0.domain, &mut rng)? {
        QueryOutcome::Rejected(reason) => Ok(Json(json!({
            "status": "rejected",
            "code": ErrorCode::BudgetRejected,
            "reason": reason,
            "message": reason.message(),
            "budget": budget_json(&s),
        }))),
        QueryOutcome::Accepted(run) => {
            st.0.store.save_session(&next)?;
            *s = next;
            Ok(Json(json!({
                "status": "accepted",
                "indices": run.output.indices,
                "terminated": run.output.terminated,
                "cost": run.cost,
                "kbar": run.kbar,
                "budget": budget_json(&s),
            })))
        }
    }
}

async fn upload_dataset(State(st): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let h = ingest_csv(body.as_ref()).map_err(|e| ApiError::validation(e.to_string()))?;
    let id = format!("ds-{:016x}", rand::random::<u64>());
    st.0.store.save_dataset(&id, &h)?;
    Ok((StatusCode::CREATED, Json(json!({ "dataset_id": id, "labels": h.len() }))))
}
