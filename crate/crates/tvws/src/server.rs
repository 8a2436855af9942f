use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;

use crate::service::{Route, Service};
use crate::wire::PullPoll;

fn respond((status, body): (u16, serde_json::Value)) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(body)).into_response()
}

async fn run(service: Arc<Service>, route: Route, body: Bytes) -> Response {
    // Handlers hold a std mutex; keep them off the async workers.
    let out = tokio::task::spawn_blocking(move || service.handle(route, &body))
        .await
        .unwrap_or_else(|e| (500, serde_json::json!({"code": "internal", "message": e.to_string()})));
    respond(out)
}

async fn query(State(s): State<Arc<Service>>, body: Bytes) -> Response {
    run(s, Route::Query, body).await
}

async fn spectrum(State(s): State<Arc<Service>>, body: Bytes) -> Response {
    run(s, Route::SpectrumReport, body).await
}

async fn tv(State(s): State<Arc<Service>>, body: Bytes) -> Response {
    run(s, Route::TvEvent, body).await
}

async fn pull_get(State(s): State<Arc<Service>>, Query(poll): Query<PullPoll>) -> Response {
    let body = serde_json::to_vec(&poll).expect("poll serializes");
    run(s, Route::PullTasks, body.into()).await
}

async fn pull_post(State(s): State<Arc<Service>>, body: Bytes) -> Response {
    run(s, Route::PullTasks, body).await
}

async fn admin_load(State(s): State<Arc<Service>>, body: Bytes) -> Response {
    run(s, Route::AdminLoad, body).await
}

async fn digest(State(s): State<Arc<Service>>) -> Response {
    run(s, Route::Digest, Bytes::new()).await
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/query", post(query))
        .route("/v1/reports/spectrum", post(spectrum))
        .route("/v1/reports/tv", post(tv))
        .route("/v1/pull-tasks", get(pull_get).post(pull_post))
        .route("/v1/admin/load", post(admin_load))
        .route("/v1/admin/digest", get(digest))
        .with_state(service)
}

/// Serves until ctrl-c, sweeping expired entries every `sweep` interval.
pub async fn serve(listener: TcpListener, service: Arc<Service>, sweep: Duration) -> std::io::Result<()> {
    let sweeper = service.clone();
    let handle = tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweep);
        tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            tick.tick().await;
            let s = sweeper.clone();
            let _ = tokio::task::spawn_blocking(move || s.expire()).await;
        }
    });
    let result = axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    handle.abort();
    result
}
