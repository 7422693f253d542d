//! Control/state channel messages and their framing.
//!
//! Records are UTF-8 JSON objects. Over a byte stream each record is
//! prefixed with its length as a 4-byte big-endian integer; over a
//! WebSocket each text message is one record. The `kind` field names the
//! message; unknown fields are ignored.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::pattern::{Bindings, Frame};
use crate::scene::ClipPose;
use crate::Point;

use super::state::{Event, Playback, SessionState};

pub const PROTO_VERSION: u32 = 1;
/// Upper bound on a single record.
pub const MAX_RECORD_BYTES: usize = 16 * 1024 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientRole {
    TopView,
    FirstPerson,
    Config,
    LedGateway,
    Observer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub role: ClientRole,
    pub display_id: String,
    pub proto_version: u32,
}

/// Per-field view data for renderers and the configuration panel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldView {
    pub id: String,
    /// Displayed label (`Scene N` while anonymized).
    pub label: String,
    pub ordinal: u32,
    pub active: bool,
    pub allowed_pattern_ids: Vec<String>,
    pub assigned_pattern_id: Option<String>,
    /// Effective colours of the assigned pattern's params.
    pub colors: Bindings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    pub state: SessionState,
    pub fields: Vec<FieldView>,
}

impl Snapshot {
    pub fn of(catalog: &Catalog, state: &SessionState) -> Self {
        let env = state.environment(catalog);
        let fields = env
            .fields
            .iter()
            .map(|f| FieldView {
                id: f.id.clone(),
                label: f.displayed_label(state.anonymized).into_owned(),
                ordinal: f.ordinal,
                active: state.active_field_id.as_deref() == Some(f.id.as_str()),
                allowed_pattern_ids: state.allowed_patterns(env, &f.id),
                assigned_pattern_id: state.assignments.get(&f.id).cloned(),
                colors: state
                    .effective_bindings(catalog, &f.id)
                    .map(|(_, b)| b)
                    .unwrap_or_default(),
            })
            .collect();
        Self {
            seq: state.seq,
            state: state.clone(),
            fields,
        }
    }
}

/// Derived consequences of an event, so that renderers need not re-run the
/// hit test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Effects {
    pub active_field_id: Option<String>,
    pub playback: Playback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub t_ms: u64,
    #[serde(flatten)]
    pub event: Event,
    pub effects: Effects,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Snapshot),
    Event(EventRecord),
    Error {
        code: String,
        msg: String,
    },
    /// Server-evaluated LED frame for the simulated vehicle; the same bytes
    /// go to the LED gateways.
    Frame {
        tick: u64,
        t_ms: u64,
        pixels: Frame,
        vehicle: Option<ClipPose>,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello(Hello),
    /// An event to sequence; `seq` (if present) is ignored.
    Event(Event),
    /// Raw simultaneous touches from one display, in device pixels.
    Touches {
        display_id: String,
        points: Vec<Point>,
    },
}

pub fn write_record(w: &mut impl Write, record: &str) -> io::Result<()> {
    let len = u32::try_from(record.len())
        .ok()
        .filter(|&n| n as usize <= MAX_RECORD_BYTES)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "record too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(record.as_bytes())?;
    w.flush()
}

/// Reads one record; `Ok(None)` on clean end of stream.
pub fn read_record(r: &mut impl Read) -> io::Result<Option<String>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_RECORD_BYTES {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "record too large"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
