//! Wire messages. Clients send JSON text messages; the server answers with
//! JSON text messages, and every frame header is followed by one binary
//! message holding the PNG.

use amrvol_core::{FrameStats, GradientMode};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::session::SceneInfo;

pub const DEFAULT_PORT: u16 = 9876;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello,
    SetCamera { pos: [f64; 3], look: [f64; 3], up: [f64; 3], fov: f64 },
    SetTf { domain: [f64; 2], rgba: Vec<[f32; 4]> },
    SetIso { value: Option<f64> },
    #[serde(rename_all = "camelCase")]
    SetParams {
        #[serde(default)]
        rate_scale: Option<f64>,
        #[serde(default)]
        gradient_mode: Option<String>,
        #[serde(default)]
        seed: Option<u64>,
    },
    RequestFrame { width: u32, height: u32 },
}

const KNOWN_TYPES: [&str; 6] = ["hello", "set_camera", "set_tf", "set_iso", "set_params", "request_frame"];

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Info {
        #[serde(flatten)]
        info: SceneInfo,
    },
    Frame {
        id: u64,
        width: u32,
        height: u32,
        encoding: &'static str,
        stats: FrameStats,
        /// Version of the scene snapshot the frame shows.
        snapshot: u64,
    },
    Error { code: String, message: String },
}

impl ServerMessage {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error { code: code.into(), message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Why a text message could not be turned into a [`ClientMessage`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParseFailure {
    pub code: &'static str,
    pub message: String,
}

pub fn parse_client_message(text: &str) -> Result<ClientMessage, ParseFailure> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| ParseFailure { code: "bad_json", message: e.to_string() })?;
    let Some(kind) = value.get("type").and_then(Value::as_str) else {
        return Err(ParseFailure { code: "bad_request", message: "missing string field 'type'".into() });
    };
    if !KNOWN_TYPES.contains(&kind) {
        return Err(ParseFailure { code: "unsupported", message: format!("unsupported message type '{kind}'") });
    }
    serde_json::from_value(value).map_err(|e| ParseFailure { code: "bad_request", message: e.to_string() })
}

pub fn parse_gradient_mode(s: &str) -> Result<GradientMode, String> {
    s.parse().map_err(|e: amrvol_core::Error| e.to_string())
}
