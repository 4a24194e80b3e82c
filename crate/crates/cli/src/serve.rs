//! HTTP front end for the similarity service.

use std::io::Write;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand_chacha::ChaCha20Rng;

use phesim::twotower::{ErrorResponse, SimilarityRequest, SimilarityService};
use phesim::Error;

struct AppState {
    service: SimilarityService,
    rng: Mutex<ChaCha20Rng>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ErrorResponse { error: message.into() })).into_response()
}

fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::DimensionMismatch { .. }
        | Error::NegativeValue(_)
        | Error::DegenerateVector
        | Error::ZeroNorm
        | Error::InvalidArgument(_)
        | Error::OverflowRisk(_) => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    Json(state.service.health()).into_response()
}

async fn similarity(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let request: SimilarityRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid request: {e}")),
    };
    let task = tokio::task::spawn_blocking(move || {
        let mut rng = state.rng.lock().unwrap_or_else(|p| p.into_inner());
        state.service.handle(&request, &mut *rng)
    });
    match task.await {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(e)) => error(status_for(&e), e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "no such endpoint")
}

pub fn router(service: SimilarityService, rng: ChaCha20Rng) -> Router {
    let state = Arc::new(AppState {
        service,
        rng: Mutex::new(rng),
    });
    Router::new()
        .route("/health", get(health))
        .route("/similarity", post(similarity))
        .fallback(not_found)
        .with_state(state)
}

pub fn run(service: SimilarityService, rng: ChaCha20Rng, host: &str, port: u16) -> Result<(), String> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| format!("{host}:{port}: {e}"))?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        let health = service.health();
        println!("listening on http://{addr} ({} records, {} dims, {})", health.records, health.dim, health.scheme);
        std::io::stdout().flush().map_err(|e| e.to_string())?;
        axum::serve(listener, router(service, rng)).await.map_err(|e| e.to_string())
    })
}
