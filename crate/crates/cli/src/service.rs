//! HTTP service. Bodies in both directions are canonical JSON; errors are
//! `{"detail": "...", "error": "<Reason>"}`.
//!
//! | status | when                                                        |
//! |--------|-------------------------------------------------------------|
//! | 200    | success                                                     |
//! | 400    | body is not JSON of the documented shape, or a bad path id  |
//! | 403    | `Unauthorized`, `UnknownToken`                              |
//! | 404    | unknown survey or digest, `NotYetAnalyzed`                  |
//! | 409    | `TokenReplay`, `DuplicateKey`, `SurveyClosed`, `NotYetOpen`, `SurveyFull`, other phase conflicts |
//! | 413    | response blob over the store's size limit                   |
//! | 422    | invalid answers or signature, digest mismatch               |
//! | 429    | submission rate limit for the caller's address exceeded     |
//! | 503    | ledger or store fault; report missing from disk             |

use std::collections::{HashMap, VecDeque};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::to_bytes;
use axum::extract::{ConnectInfo, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use codewe_core::{canonical_encode, Digest, Node};
use parking_lot::Mutex;
use serde::Serialize;

use crate::app::{self, SubmissionRequest};
use crate::error::AppError;

const MAX_BODY: usize = 1 << 20;

/// Sliding one-minute window per remote address.
#[derive(Debug)]
pub struct RateLimiter {
    per_window: u32,
    window: Duration,
    hits: Mutex<HashMap<IpAddr, VecDeque<Instant>>>,
}

impl RateLimiter {
    /// `per_minute == 0` disables limiting.
    pub fn per_minute(per_minute: u32) -> Self {
        Self::new(per_minute, Duration::from_secs(60))
    }

    pub fn new(per_window: u32, window: Duration) -> Self {
        Self {
            per_window,
            window,
            hits: Mutex::new(HashMap::new()),
        }
    }

    pub fn allow(&self, addr: IpAddr, now: Instant) -> bool {
        if self.per_window == 0 {
            return true;
        }
        let mut hits = self.hits.lock();
        let q = hits.entry(addr).or_default();
        while q.front().is_some_and(|t| now.duration_since(*t) >= self.window) {
            q.pop_front();
        }
        if q.len() as u32 >= self.per_window {
            return false;
        }
        q.push_back(now);
        true
    }
}

pub struct AppState {
    pub node: Node,
    pub reports: PathBuf,
    pub limiter: RateLimiter,
}

pub type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/surveys/{id}", get(get_survey))
        .route("/surveys/{id}/responses", post(post_response))
        .route("/surveys/{id}/proof/{digest}", get(get_proof))
        .route("/surveys/{id}/report", get(get_report))
        .route("/surveys/{id}/audit", get(get_audit))
        .route("/surveys/{id}/codesign", get(get_codesign))
        .with_state(state)
}

fn canonical<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match canonical_encode(value) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => {
            tracing::error!(error = %e, "response body failed to encode");
            StatusCode::INTERNAL_SERVER_ERROR.into_response()
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    detail: String,
}

fn error_response(status: StatusCode, code: &str, detail: String) -> Response {
    canonical(status, &ErrorBody { error: code, detail })
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = self.http_status();
        if status.is_server_error() {
            tracing::warn!(reason = self.code(), error = %self, "request failed");
        }
        error_response(status, self.code(), self.to_string())
    }
}

fn parse_digest(s: &str) -> Result<Digest, Response> {
    s.parse().map_err(|_| {
        error_response(StatusCode::BAD_REQUEST, "MalformedId", format!("`{s}` is not a 64-character lowercase hex digest"))
    })
}

/// Runs a blocking store operation off the async workers so reads stay
/// responsive while a write or analysis holds the ledger.
async fn blocking<T: Send + 'static>(
    state: &Shared,
    f: impl FnOnce(&AppState) -> Result<T, AppError> + Send + 'static,
) -> Result<T, AppError> {
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .unwrap_or_else(|e| Err(AppError::ReportUnavailable(format!("worker failed: {e}"))))
}

async fn get_survey(State(state): State<Shared>, Path(id): Path<String>) -> Response {
    let id = match parse_digest(&id) {
        Ok(d) => d,
        Err(r) => return r,
    };
    match blocking(&state, move |s| app::survey_view(&s.node, &id)).await {
        Ok(view) => canonical(StatusCode::OK, &view),
        Err(e) => e.into_response(),
    }
}

async fn post_response(State(state): State<Shared>, Path(id): Path<String>, req: Request) -> Response {
    let id = match parse_digest(&id) {
        Ok(d) => d,
        Err(r) => return r,
    };
    let remote = req
        .extensions()
        .get::<ConnectInfo<SocketAddr>>()
        .map(|c| c.0.ip())
        .unwrap_or(IpAddr::V4(Ipv4Addr::UNSPECIFIED));
    if !state.limiter.allow(remote, Instant::now()) {
        tracing::info!(survey = %id, "submission rate limited");
        return error_response(
            StatusCode::TOO_MANY_REQUESTS,
            "RateLimited",
            "too many submissions from this address; try again in a minute".into(),
        );
    }
    let bytes = match to_bytes(req.into_body(), MAX_BODY).await {
        Ok(b) => b,
        Err(_) => {
            return error_response(StatusCode::PAYLOAD_TOO_LARGE, "BodyTooLarge", format!("request body over {MAX_BODY} bytes"))
        }
    };
    let submission: SubmissionRequest = match serde_json::from_slice(&bytes) {
        Ok(s) => s,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, "MalformedRequest", e.to_string()),
    };
    match blocking(&state, move |s| app::submit(&s.node, &id, &submission)).await {
        Ok(receipt) => {
            tracing::info!(survey = %id, height = receipt.height, "response accepted");
            canonical(StatusCode::OK, &receipt)
        }
        Err(e) => {
            tracing::info!(survey = %id, reason = e.code(), "response rejected");
            e.into_response()
        }
    }
}

async fn get_proof(State(state): State<Shared>, Path((id, digest)): Path<(String, String)>) -> Response {
    let (id, digest) = match (parse_digest(&id), parse_digest(&digest)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(r), _) | (_, Err(r)) => return r,
    };
    match blocking(&state, move |s| app::proof(&s.node, &s.reports, &id, &digest)).await {
        Ok(p) => canonical(StatusCode::OK, &p),
        Err(e) => e.into_response(),
    }
}

async fn get_report(State(state): State<Shared>, Path(id): Path<String>) -> Response {
    let id = match parse_digest(&id) {
        Ok(d) => d,
        Err(r) => return r,
    };
    match blocking(&state, move |s| app::load_report(&s.node, &s.reports, &id)).await {
        Ok(r) => canonical(StatusCode::OK, &r),
        Err(e) => e.into_response(),
    }
}

async fn get_audit(State(state): State<Shared>, Path(id): Path<String>) -> Response {
    let id = match parse_digest(&id) {
        Ok(d) => d,
        Err(r) => return r,
    };
    match blocking(&state, move |s| app::audit(&s.node, &s.reports, &id)).await {
        Ok(view) => {
            tracing::info!(survey = %id, clean = view.finding.verdict.is_clean(), "audit served");
            canonical(StatusCode::OK, &view)
        }
        Err(e) => e.into_response(),
    }
}

async fn get_codesign(State(state): State<Shared>, Path(id): Path<String>) -> Response {
    let id = match parse_digest(&id) {
        Ok(d) => d,
        Err(r) => return r,
    };
    match blocking(&state, move |s| app::codesign_record(&s.node, &id)).await {
        Ok(record) => canonical(StatusCode::OK, &record.summary()),
        Err(e) => e.into_response(),
    }
}

/// Binds and serves until ctrl-c.
pub async fn serve(state: Shared, listen: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    axum::serve(
        listener,
        router(state).into_make_service_with_connect_info::<SocketAddr>(),
    )
    .with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
