//! Frame-service wire format.
//!
//! Each request is one line of JSON terminated by `\n`. Each reply is one line
//! of JSON (the header) followed by exactly `payload_len` raw bytes, which is
//! zero for replies without a payload.
//!
//! Frame request and reply:
//!
//! ```text
//! -> {"type":"frame","id":1,"scene":"s01","orientation":[1,0,0,0],"condition":{"fov_deg":20,"phosphenes":500}}
//! <- {"type":"frame","id":1,"width":960,"height":1080,"render_ms":3.1,"payload_len":1036800}
//!    <1036800 bytes: row-major u8 intensities, one channel>
//! ```
//!
//! `orientation` is `[w, x, y, z]` unless `"quat_order":"scalar_last"` is
//! given. It is normalized by the server; a zero or non-numeric quaternion is
//! rejected.
//!
//! Session endpoints mirror the headless session loop with events supplied by
//! the client:
//!
//! ```text
//! -> {"type":"session_start","seed":7,"participant":"p01"}
//! <- {"type":"session","session_id":1,"participant":"p01","break_after":7,"steps":[...],"payload_len":0}
//! -> {"type":"session_event","session_id":1,"step":1,"event_type":"fixation","timestamp_s":-2.0}
//! -> {"type":"session_event","session_id":1,"step":1,"event_type":"response","timestamp_s":4.2,"object_class":"bed"}
//! <- {"type":"ack","session_id":1,"step":1,"count":1,"payload_len":0}
//! -> {"type":"session_event","session_id":1,"step":1,"event_type":"done","timestamp_s":9.0}
//! -> {"type":"session_log","session_id":1}
//! <- {"type":"session_log","session_id":1,"payload_len":...}
//!    <session log as JSON lines>
//! ```
//!
//! Any failure produces `{"type":"error","code":...,"message":...}` and the
//! connection stays open.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use spv_core::experiment::{EventType, ObjectClass, PlanStep};
use spv_core::geometry::QuatOrder;
use spv_core::Condition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub scene: String,
    pub orientation: [f64; 4],
    #[serde(default)]
    pub quat_order: QuatOrder,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStartRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
    /// Defaults to the full 2 × 3 grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<Vec<Condition>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEventRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub session_id: u64,
    pub step: u32,
    pub event_type: EventType,
    pub timestamp_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_class: Option<ObjectClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Frame(FrameRequest),
    SessionStart(SessionStartRequest),
    SessionEvent(SessionEventRequest),
    SessionLog {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        session_id: u64,
    },
}

impl Request {
    pub fn id(&self) -> Option<u64> {
        match self {
            Request::Frame(r) => r.id,
            Request::SessionStart(r) => r.id,
            Request::SessionEvent(r) => r.id,
            Request::SessionLog { id, .. } => *id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedRequest,
    InvalidOrientation,
    UnknownScene,
    UnknownSession,
    InvalidEvent,
    RenderFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Frame {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        width: u32,
        height: u32,
        render_ms: f64,
        payload_len: usize,
    },
    Session {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        session_id: u64,
        participant: String,
        break_after: usize,
        steps: Vec<PlanStep>,
        payload_len: usize,
    },
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        session_id: u64,
        step: u32,
        /// Running count for the response's class; 0 for other events.
        count: u32,
        payload_len: usize,
    },
    SessionLog {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        session_id: u64,
        payload_len: usize,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        code: ErrorCode,
        message: String,
        payload_len: usize,
    },
}

impl Reply {
    pub fn payload_len(&self) -> usize {
        match self {
            Reply::Frame { payload_len, .. }
            | Reply::Session { payload_len, .. }
            | Reply::Ack { payload_len, .. }
            | Reply::SessionLog { payload_len, .. }
            | Reply::Error { payload_len, .. } => *payload_len,
        }
    }

    pub fn error(id: Option<u64>, code: ErrorCode, message: impl Into<String>) -> Self {
        Reply::Error {
            id,
            code,
            message: message.into(),
            payload_len: 0,
        }
    }
}

pub fn write_reply(w: &mut impl Write, header: &Reply, payload: &[u8]) -> io::Result<()> {
    debug_assert_eq!(header.payload_len(), payload.len());
    let mut line = serde_json::to_vec(header).map_err(io::Error::other)?;
    line.push(b'\n');
    w.write_all(&line)?;
    w.write_all(payload)?;
    w.flush()
}

/// Reads one header line and its payload. `None` at end of stream.
pub fn read_reply(r: &mut impl BufRead) -> io::Result<Option<(Reply, Vec<u8>)>> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    let header: Reply = serde_json::from_str(line.trim_end()).map_err(io::Error::other)?;
    let mut payload = vec![0u8; header.payload_len()];
    r.read_exact(&mut payload)?;
    Ok(Some((header, payload)))
}
