//! `/api/events`: snapshot (or missed events) first, then live events and
//! heartbeats.

use axum::extract::rejection::QueryRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::Response;
use futures::{SinkExt, StreamExt};
use ke_core::EventEnvelope;
use serde::Deserialize;
use tokio::sync::broadcast::error::RecvError;

use crate::{query, ApiError, AppState};

#[derive(Deserialize)]
pub(crate) struct EventsQuery {
    session: String,
    from_seq: Option<u64>,
}

pub(crate) async fn events(
    State(s): State<AppState>,
    q: Result<Query<EventsQuery>, QueryRejection>,
    upgrade: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    if !s.engine.read().await.has_session(&q.session) {
        return Err(ke_core::EngineError::new("UNKNOWN_SESSION", format!("no session `{}`", q.session)).into());
    }
    Ok(upgrade.on_upgrade(move |socket| stream(socket, s, q.from_seq)))
}

async fn send(socket: &mut futures::stream::SplitSink<WebSocket, Message>, env: &EventEnvelope) -> bool {
    let text = serde_json::to_string(env).expect("events serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

async fn stream(socket: WebSocket, s: AppState, from_seq: Option<u64>) {
    let (mut tx, mut rx_socket) = socket.split();
    // Subscribing under the lock means no event falls between the
    // starting point and the live feed.
    let (mut live, sub) = {
        let engine = s.engine.read().await;
        (s.events.subscribe(), engine.subscribe(from_seq))
    };
    let mut sent = sub.covered_seq;
    for env in sub.snapshot.iter().chain(&sub.backlog) {
        if !send(&mut tx, env).await {
            return;
        }
    }
    let mut heartbeat = tokio::time::interval(s.heartbeat);
    heartbeat.tick().await;
    loop {
        tokio::select! {
            msg = live.recv() => match msg {
                Ok(env) => {
                    if env.seq <= sent {
                        continue;
                    }
                    sent = env.seq;
                    if !send(&mut tx, &env).await {
                        return;
                    }
                }
                Err(RecvError::Lagged(_)) => {
                    // Too slow for the buffer: start over from where we are.
                    let sub = {
                        let engine = s.engine.read().await;
                        live = live.resubscribe();
                        engine.subscribe(Some(sent))
                    };
                    for env in sub.snapshot.iter().chain(&sub.backlog) {
                        if !send(&mut tx, env).await {
                            return;
                        }
                    }
                    sent = sub.covered_seq;
                }
                Err(RecvError::Closed) => return,
            },
            _ = heartbeat.tick() => {
                let env = s.engine.read().await.heartbeat();
                if !send(&mut tx, &env).await {
                    return;
                }
            }
            incoming = rx_socket.next() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
