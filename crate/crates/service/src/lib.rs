//! Stateless JSON API over the analytic engines.
//!
//! Every endpoint takes the same flat request schema as the CLI `--config`
//! files and answers with the versioned envelope. Schema problems are 400,
//! computation errors 422; both carry `{"v":1,"error":{"code","detail"}}`.
//! Simulation commands are deliberately not exposed: they are CLI-only so
//! that every request here stays short.

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::Router;
use ppos_core::api::{self, ApiError, Params, Response};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::limit::RequestBodyLimitLayer;
use tower_http::trace::TraceLayer;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Maximum beta-binomial indicator evaluations per request.
    pub betabinom_cap: u64,
    /// Origin allowed by CORS; `None` disables the CORS layer.
    pub cors_origin: Option<String>,
    /// Maximum request body, bytes.
    pub body_limit: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { betabinom_cap: api::DEFAULT_BETABINOM_CAP, cors_origin: None, body_limit: 64 * 1024 }
    }
}

#[derive(Clone, Copy)]
enum Cmd {
    Pos,
    SuccIa,
    Betabinom,
    Curves,
}

fn json_response(status: StatusCode, body: String) -> HttpResponse {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(e: &ApiError) -> HttpResponse {
    let status = match e {
        ApiError::Schema(_) => StatusCode::BAD_REQUEST,
        ApiError::Compute(_) => StatusCode::UNPROCESSABLE_ENTITY,
    };
    tracing::info!(code = e.code(), detail = e.detail(), "request rejected");
    json_response(status, api::canonical_json(&e.to_json()))
}

fn compute(cmd: Cmd, body: &[u8], cap: u64) -> Result<Response, ApiError> {
    let value: Value =
        serde_json::from_slice(body).map_err(|e| ApiError::Schema(format!("body is not valid JSON: {e}")))?;
    let p = Params::from_json(value)?;
    match cmd {
        Cmd::Pos => api::run_pos(&p),
        Cmd::SuccIa => api::run_succ_ia(&p),
        Cmd::Betabinom => api::run_betabinom(&p, Some(cap)),
        Cmd::Curves => api::run_curves(&p),
    }
}

async fn handle(cmd: Cmd, cfg: ServiceConfig, body: Bytes) -> HttpResponse {
    // The beta-binomial sum can take a while; keep it off the reactor.
    let cap = cfg.betabinom_cap;
    match tokio::task::spawn_blocking(move || compute(cmd, &body, cap)).await {
        Ok(Ok(resp)) => json_response(StatusCode::OK, resp.canonical()),
        Ok(Err(e)) => error_response(&e),
        Err(join) => {
            tracing::error!(error = %join, "computation task failed");
            let e = ApiError::Compute(ppos_core::Error::Numerical("computation aborted".into()));
            json_response(StatusCode::INTERNAL_SERVER_ERROR, api::canonical_json(&e.to_json()))
        }
    }
}

async fn healthz() -> HttpResponse {
    json_response(
        StatusCode::OK,
        api::canonical_json(&json!({ "status": "ok", "version": VERSION, "v": api::SCHEMA_VERSION })),
    )
}

pub fn router(cfg: ServiceConfig) -> Router {
    let route = |cmd: Cmd| {
        post(move |State(cfg): State<ServiceConfig>, body: Bytes| handle(cmd, cfg, body))
    };
    let mut app = Router::new()
        .route("/api/v1/pos", route(Cmd::Pos))
        .route("/api/v1/succ-ia", route(Cmd::SuccIa))
        .route("/api/v1/betabinom", route(Cmd::Betabinom))
        .route("/api/v1/curves", route(Cmd::Curves))
        .route("/healthz", get(healthz))
        .layer(RequestBodyLimitLayer::new(cfg.body_limit))
        .layer(TraceLayer::new_for_http());
    if let Some(origin) = &cfg.cors_origin {
        let allow = if origin == "*" {
            AllowOrigin::any()
        } else {
            match HeaderValue::from_str(origin) {
                Ok(v) => AllowOrigin::exact(v),
                Err(_) => {
                    tracing::warn!(origin, "ignoring unparsable CORS origin");
                    return app.with_state(cfg);
                }
            }
        };
        app = app.layer(
            CorsLayer::new()
                .allow_origin(allow)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    app.with_state(cfg)
}
