//! HTTP and WebSocket front end for [`ke_core::Engine`].
//!
//! All requests share one engine behind a read-write lock. Writers queue
//! on the lock in arrival order, so the lock is the mutation queue; events
//! are broadcast while the writer still holds it, which keeps every
//! subscriber's view in global sequence order.

mod error;
mod ws;

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use ke_core::engine::{ChatTurn, DeleteOutcome, EdgeDescription, Health};
use ke_core::sim::SceneSnapshot;
use ke_core::{EdgeId, Engine, EventEnvelope, GraphFragment, Trace};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, RwLock};
use tower_http::services::ServeDir;

pub use error::ApiError;

/// Live events buffered per subscriber before it has to resynchronize.
pub const BROADCAST_CAPACITY: usize = 4096;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    /// Simulator ticks per second.
    pub tick_hz: f64,
    pub heartbeat: Duration,
    /// Directory served at `/` when set, e.g. a built web client.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { tick_hz: 20.0, heartbeat: Duration::from_secs(5), static_dir: None }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<RwLock<Engine>>,
    events: broadcast::Sender<EventEnvelope>,
    heartbeat: Duration,
}

impl AppState {
    pub fn new(mut engine: Engine, config: &ServerConfig) -> Self {
        let (events, _) = broadcast::channel(BROADCAST_CAPACITY);
        let tx = events.clone();
        engine.add_listener(move |env| {
            let _ = tx.send(env.clone());
        });
        Self { engine: Arc::new(RwLock::new(engine)), events, heartbeat: config.heartbeat }
    }
}

pub fn router(state: AppState, config: &ServerConfig) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/session", post(create_session))
        .route("/api/chat", post(chat))
        .route("/api/trace/{turn}", get(trace))
        .route("/api/turn/{turn}", get(turn))
        .route("/api/graph/{node}", get(graph))
        .route("/api/edge/{id}", delete(delete_edge))
        .route("/api/edge/{id}/restore", post(restore_edge))
        .route("/api/undo/{token}", post(undo))
        .route("/api/scene", get(scene))
        .route("/api/events", get(ws::events))
        .with_state(state);
    match &config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError(ke_core::EngineError::new("NOT_FOUND", "no such endpoint")) }),
    }
}

/// Advances the simulator at `tick_hz` while a plan is queued.
pub fn spawn_ticker(state: &AppState, tick_hz: f64) -> tokio::task::JoinHandle<()> {
    let engine = state.engine.clone();
    let period = Duration::from_secs_f64(1.0 / tick_hz.max(f64::MIN_POSITIVE));
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(period);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            interval.tick().await;
            if engine.read().await.is_idle() {
                continue;
            }
            engine.write().await.tick();
        }
    })
}

/// Serves until `shutdown` resolves, then hands the engine back so the
/// caller can persist it.
pub async fn serve(
    listener: TcpListener,
    engine: Engine,
    config: ServerConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<Arc<RwLock<Engine>>> {
    let state = AppState::new(engine, &config);
    let ticker = spawn_ticker(&state, config.tick_hz);
    let shared = state.engine.clone();
    let app = router(state, &config);
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    ticker.abort();
    result.map(|()| shared)
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(t)| t).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn health(State(s): State<AppState>) -> Json<Health> {
    Json(s.engine.read().await.health())
}

#[derive(Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

async fn create_session(State(s): State<AppState>) -> Json<SessionCreated> {
    Json(SessionCreated { session_id: s.engine.write().await.create_session() })
}

#[derive(Serialize, Deserialize)]
pub struct ChatRequest {
    pub session_id: String,
    pub text: String,
}

async fn chat(State(s): State<AppState>, body: Result<Json<ChatRequest>, JsonRejection>) -> ApiResult<ChatTurn> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    Ok(Json(s.engine.write().await.post_chat(&req.session_id, &req.text)?))
}

async fn trace(State(s): State<AppState>, Path(turn): Path<u64>) -> ApiResult<Trace> {
    Ok(Json(s.engine.read().await.trace(turn)?.clone()))
}

async fn turn(State(s): State<AppState>, Path(turn): Path<u64>) -> ApiResult<ChatTurn> {
    Ok(Json(s.engine.read().await.turn(turn)?.clone()))
}

#[derive(Deserialize)]
struct DepthQuery {
    #[serde(default = "default_depth")]
    depth: usize,
}

fn default_depth() -> usize {
    1
}

async fn graph(
    State(s): State<AppState>,
    Path(node): Path<String>,
    q: Result<Query<DepthQuery>, QueryRejection>,
) -> ApiResult<GraphFragment> {
    let q = query(q)?;
    Ok(Json(s.engine.read().await.neighborhood(&node, q.depth)?))
}

#[derive(Deserialize)]
struct ConfirmQuery {
    #[serde(default)]
    confirm: bool,
}

async fn delete_edge(
    State(s): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<ConfirmQuery>, QueryRejection>,
) -> ApiResult<DeleteOutcome> {
    let q = query(q)?;
    Ok(Json(s.engine.write().await.delete_edge(&EdgeId::new(id), q.confirm)?))
}

async fn restore_edge(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<EdgeDescription> {
    Ok(Json(s.engine.write().await.restore_edge(&EdgeId::new(id))?))
}

async fn undo(State(s): State<AppState>, Path(token): Path<String>) -> ApiResult<EdgeDescription> {
    Ok(Json(s.engine.write().await.undo(&token)?))
}

async fn scene(State(s): State<AppState>) -> Json<SceneSnapshot> {
    Json(s.engine.read().await.scene())
}
