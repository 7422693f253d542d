//! Headless scripted sessions on a fake clock.
//!
//! A script has one event per line: `<t_ms> <EventType> <body>`, where the
//! body is a JSON object. Blank lines and lines starting with `#` are
//! skipped. `end <t_ms>` sets where ticking stops; without it the run ends
//! at the last event's time. Ticks cover `[0, end)`; events at or before a
//! tick's time are applied before that tick is evaluated.

use std::fmt::Write as _;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::clock::{Clock, FakeClock};
use crate::gateway::{encode, EmulatorLog, Ingest};
use crate::pattern::Frame;
use crate::session::{
    apply, tick_time_ms, ClientRole, Event, Hello, ServerMessage, SessionServer, SessionState, PROTO_VERSION,
};

#[derive(Clone, Debug, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScriptLine {
    pub line: usize,
    pub t_ms: u64,
    pub event: Event,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Script {
    pub events: Vec<ScriptLine>,
    pub end_ms: Option<u64>,
}

impl Script {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut script = Script::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScriptError { line, message };
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (head, rest) = split_word(s);
            if head == "end" {
                let t = rest
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| err(format!("bad end time {:?}", rest.trim())))?;
                script.end_ms = Some(t);
                continue;
            }
            let t_ms: u64 = head.parse().map_err(|_| err(format!("bad timestamp {head:?}")))?;
            if let Some(prev) = script.events.last() {
                if t_ms < prev.t_ms {
                    return Err(err(format!("timestamp {t_ms} is before {}", prev.t_ms)));
                }
            }
            let (kind, body) = split_word(rest.trim_start());
            if kind.is_empty() {
                return Err(err("missing event type".into()));
            }
            let body: serde_json::Value = if body.trim().is_empty() {
                serde_json::Value::Object(Default::default())
            } else {
                serde_json::from_str(body).map_err(|e| err(format!("bad body: {e}")))?
            };
            let event: Event = serde_json::from_value(serde_json::json!({ "type": kind, "body": body }))
                .map_err(|e| err(format!("bad {kind} event: {e}")))?;
            script.events.push(ScriptLine { line, t_ms, event });
        }
        Ok(script)
    }

    pub fn end_ms(&self) -> u64 {
        self.end_ms
            .unwrap_or_else(|| self.events.last().map_or(0, |e| e.t_ms))
    }
}

fn split_word(s: &str) -> (&str, &str) {
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    }
}

#[derive(Clone, Debug)]
pub struct ReplayOutput {
    /// Snapshot then event records, one JSON object per line.
    pub event_log: String,
    /// One frame record per tick.
    pub frame_log: String,
    /// What an LED gateway received, decoded from the encoded packets.
    pub led: EmulatorLog,
    /// Ticks whose LED payload differed from the broadcast frame.
    pub led_mismatches: Vec<u64>,
    pub ticks: u64,
    pub final_state: SessionState,
}

impl ReplayOutput {
    /// SHA-256 over both logs, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.event_log.as_bytes());
        h.update([0u8]);
        h.update(self.frame_log.as_bytes());
        h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Runs `script` against a fresh session. The logs are exactly what an
/// observer client connected at time 0 received.
pub fn run(catalog: Arc<Catalog>, script: &Script, tick_hz: u32) -> Result<ReplayOutput, ScriptError> {
    let clock = FakeClock::new(0);
    let mut server = SessionServer::new(catalog);
    let observer = server
        .connect(Hello {
            role: ClientRole::Observer,
            display_id: "replay".into(),
            proto_version: PROTO_VERSION,
        })
        .expect("valid hello");
    let mut led = EmulatorLog::new();
    let mut led_mismatches = Vec::new();
    let mut event_log = String::new();
    let mut frame_log = String::new();

    let end = script.end_ms();
    let mut pending = script.events.iter().peekable();
    let mut tick = 0u64;
    let mut seq = 0u16;
    let submit = |server: &mut SessionServer, l: &ScriptLine| {
        server.submit(l.event.clone(), l.t_ms).map(|_| ()).map_err(|e| ScriptError {
            line: l.line,
            message: format!("{} rejected: {e}", l.event.type_name()),
        })
    };
    loop {
        let now = tick_time_ms(tick, tick_hz);
        if now >= end {
            break;
        }
        clock.set(now);
        while let Some(l) = pending.next_if(|l| l.t_ms <= clock.now_ms()) {
            submit(&mut server, l)?;
            drain(&observer.rx, &mut event_log, &mut frame_log, |t, _| led_mismatches.push(t));
        }
        let (_, out) = server.tick(clock.now_ms());
        let packet = encode(&out.frame, seq, 0);
        let received = match led.ingest(&packet, now) {
            Ok(Ingest::Accepted) => led.latest().map(|f| f.pixels),
            _ => None,
        };
        seq = seq.wrapping_add(1);
        drain(&observer.rx, &mut event_log, &mut frame_log, |t, pixels| {
            if t != tick || received.as_ref() != Some(pixels) {
                led_mismatches.push(t);
            }
        });
        tick += 1;
    }
    for l in pending {
        submit(&mut server, l)?;
        drain(&observer.rx, &mut event_log, &mut frame_log, |t, _| led_mismatches.push(t));
    }
    drain(&observer.rx, &mut event_log, &mut frame_log, |t, _| led_mismatches.push(t));

    Ok(ReplayOutput {
        event_log,
        frame_log,
        led,
        led_mismatches,
        ticks: tick,
        final_state: (*server.state()).clone(),
    })
}

/// Splits the observer's stream into the two logs, passing every broadcast
/// frame (as the client decoded it) to `on_frame`.
fn drain(
    rx: &std::sync::mpsc::Receiver<crate::session::Outgoing>,
    events: &mut String,
    frames: &mut String,
    mut on_frame: impl FnMut(u64, &Frame),
) {
    while let Ok(msg) = rx.try_recv() {
        let parsed: ServerMessage = serde_json::from_str(&msg).expect("server output parses");
        if let ServerMessage::Frame { tick, ref pixels, .. } = parsed {
            on_frame(tick, pixels);
            frames.push_str(&msg);
            frames.push('\n');
        } else {
            events.push_str(&msg);
            events.push('\n');
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LogError {
    #[error("line {0}: {1}")]
    Json(usize, String),
    #[error("event log must start with a snapshot")]
    NoSnapshot,
    #[error("line {line}: expected seq {expected}, found {found}")]
    SeqGap { line: usize, expected: u64, found: u64 },
    #[error("line {line}: {message}")]
    Rejected { line: usize, message: String },
}

/// Rebuilds the final state from an event log by re-applying every event to
/// its leading snapshot. Non-event records are ignored.
pub fn replay_event_log(catalog: &Catalog, text: &str) -> Result<SessionState, LogError> {
    let mut state: Option<SessionState> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let msg: ServerMessage = serde_json::from_str(raw).map_err(|e| LogError::Json(line, e.to_string()))?;
        match (msg, state.as_mut()) {
            (ServerMessage::Snapshot(s), None) => state = Some(s.state),
            (_, None) => return Err(LogError::NoSnapshot),
            (ServerMessage::Event(rec), Some(cur)) => {
                if rec.seq != cur.seq + 1 {
                    return Err(LogError::SeqGap {
                        line,
                        expected: cur.seq + 1,
                        found: rec.seq,
                    });
                }
                *cur = apply(catalog, cur, &rec.event, rec.t_ms).map_err(|e| LogError::Rejected {
                    line,
                    message: e.to_string(),
                })?;
            }
            _ => {}
        }
    }
    state.ok_or(LogError::NoSnapshot)
}

/// Frame shown at `tick` according to a frame log.
pub fn frame_log_entry(frame_log: &str, tick: usize) -> Option<(u64, Frame)> {
    let line = frame_log.lines().nth(tick)?;
    match serde_json::from_str(line).ok()? {
        ServerMessage::Frame { t_ms, pixels, .. } => Some((t_ms, pixels)),
        _ => None,
    }
}
