use std::collections::HashMap;
use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::pipeline::{Pipeline, PipelineError};

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Deserialize)]
struct CheckRequest {
    claim: Option<String>,
}

fn error(status: StatusCode, code: &str, message: impl ToString) -> Response {
    let body = ErrorBody {
        error: ErrorDetail {
            code: code.to_string(),
            message: message.to_string(),
        },
    };
    (status, Json(body)).into_response()
}

async fn run_check(pipeline: &Pipeline, claim: Option<String>) -> Response {
    let Some(claim) = claim else {
        return error(
            StatusCode::BAD_REQUEST,
            "missing_claim",
            "request must carry a \"claim\" string",
        );
    };
    match pipeline.check(&claim).await {
        Ok(verdict) => Json(verdict).into_response(),
        Err(PipelineError::InvalidClaim(e)) => error(StatusCode::BAD_REQUEST, "empty_claim", e),
        Err(PipelineError::ModelNotLoaded) => error(
            StatusCode::SERVICE_UNAVAILABLE,
            "model_not_loaded",
            PipelineError::ModelNotLoaded,
        ),
        Err(e) => {
            log::error!("check failed: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e)
        }
    }
}

async fn check_post(State(p): State<Arc<Pipeline>>, body: Bytes) -> Response {
    match serde_json::from_slice::<CheckRequest>(&body) {
        Ok(req) => run_check(&p, req.claim).await,
        Err(e) => error(StatusCode::BAD_REQUEST, "invalid_json", e),
    }
}

async fn check_get(State(p): State<Arc<Pipeline>>, Query(params): Query<HashMap<String, String>>) -> Response {
    run_check(&p, params.get("claim").cloned()).await
}

async fn healthz(State(p): State<Arc<Pipeline>>) -> Response {
    Json(serde_json::json!({
        "status": "ok",
        "name": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "model_loaded": p.predictor().is_some(),
        "backend": p.backend_mode(),
    }))
    .into_response()
}

async fn metrics(State(p): State<Arc<Pipeline>>) -> Response {
    (
        [(header::CONTENT_TYPE, "text/plain; version=0.0.4")],
        p.metrics().render(),
    )
        .into_response()
}

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/metrics", get(metrics))
        .route("/api/v1/check", get(check_get).post(check_post))
        .with_state(pipeline)
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    pipeline: Arc<Pipeline>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(pipeline))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `host:port` and serves until Ctrl-C.
pub async fn serve(pipeline: Arc<Pipeline>, host: &str, port: u16) -> anyhow::Result<()> {
    let listener = TcpListener::bind((host, port))
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {host}:{port}: {e}"))?;
    log::info!("listening on {}", listener.local_addr()?);
    serve_on(listener, pipeline, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
