//! Frame-streaming render service.
//!
//! One shared [`Session`] holds the scene. Clients connect over a websocket
//! at `/ws`, steer the camera, transfer function, iso-value and quality with
//! JSON messages, and receive PNG frames. `/health` returns scene info.

mod error;
pub mod protocol;
mod session;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use amrvol_core::{DVec3, TransferFunction};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use tokio::net::TcpListener;

pub use error::ServiceError;
pub use protocol::{parse_client_message, ClientMessage, ServerMessage, DEFAULT_PORT};
pub use session::{
    CameraPose, ParamsEdit, RenderedFrame, SceneInfo, SceneStats, Session, SessionOptions, Snapshot,
    MAX_FRAME_EDGE,
};

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/ws", get(upgrade))
        .with_state(session)
}

/// Binds `addr`, reporting a busy port as [`ServiceError::Bind`].
pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { port: addr.port(), source })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    session: Arc<Session>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, router(session)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

#[derive(serde::Serialize)]
struct Health<'a> {
    service: &'static str,
    version: &'static str,
    #[serde(flatten)]
    info: &'a SceneInfo,
}

async fn health(State(session): State<Arc<Session>>) -> impl IntoResponse {
    let body = serde_json::to_value(Health {
        service: "amrvol",
        version: env!("CARGO_PKG_VERSION"),
        info: session.info(),
    })
    .expect("health serializes");
    Json(body)
}

async fn upgrade(ws: WebSocketUpgrade, State(session): State<Arc<Session>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, session))
}

/// Handles one client. Messages are processed in arrival order, so a frame
/// requested after an edit on the same connection always shows that edit.
async fn connection(mut socket: WebSocket, session: Arc<Session>) {
    while let Some(Ok(msg)) = socket.recv().await {
        let replies = match msg {
            Message::Text(text) => handle_text(&session, text.as_str()).await,
            Message::Binary(_) => vec![Reply::Json(ServerMessage::error("bad_request", "binary messages are not accepted"))],
            Message::Close(_) => break,
            _ => continue,
        };
        for reply in replies {
            let out = match reply {
                Reply::Json(m) => Message::Text(m.to_json().into()),
                Reply::Binary(b) => Message::Binary(b.into()),
            };
            if socket.send(out).await.is_err() {
                return;
            }
        }
    }
    log::debug!("client disconnected");
}

enum Reply {
    Json(ServerMessage),
    Binary(Vec<u8>),
}

fn failure(e: ServiceError) -> Vec<Reply> {
    vec![Reply::Json(ServerMessage::error(e.code(), e.to_string()))]
}

async fn handle_text(session: &Session, text: &str) -> Vec<Reply> {
    let msg = match parse_client_message(text) {
        Ok(m) => m,
        Err(f) => return vec![Reply::Json(ServerMessage::error(f.code, f.message))],
    };
    let done = match msg {
        ClientMessage::Hello => {
            return vec![Reply::Json(ServerMessage::Info { info: session.info().clone() })];
        }
        ClientMessage::SetCamera { pos, look, up, fov } => {
            let pose = CameraPose { pos: DVec3::from(pos), look: DVec3::from(look), up: DVec3::from(up), fov };
            session.set_camera(pose).await
        }
        ClientMessage::SetTf { domain, rgba } => match TransferFunction::new(domain, rgba) {
            Ok(tf) => session.set_tf(tf).await,
            Err(e) => Err(e.into()),
        },
        ClientMessage::SetIso { value } => session.set_iso(value).await,
        ClientMessage::SetParams { rate_scale, gradient_mode, seed } => {
            let gradient = match gradient_mode.as_deref().map(protocol::parse_gradient_mode).transpose() {
                Ok(g) => g,
                Err(e) => return failure(ServiceError::Invalid(e)),
            };
            session.set_params(ParamsEdit { rate_scale, gradient, seed }).await
        }
        ClientMessage::RequestFrame { width, height } => {
            return match session.render(width, height).await {
                Ok(f) => vec![
                    Reply::Json(ServerMessage::Frame {
                        id: f.id,
                        width: f.width,
                        height: f.height,
                        encoding: "png",
                        stats: f.stats,
                        snapshot: f.version,
                    }),
                    Reply::Binary(f.png),
                ],
                Err(e) => failure(e),
            };
        }
    };
    match done {
        Ok(()) => Vec::new(),
        Err(e) => failure(e),
    }
}
