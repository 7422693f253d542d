//! Single-writer session: sequences events, keeps the log and fans messages
//! out to connected clients over bounded queues.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::Arc;

use thiserror::Error;

use crate::catalog::Catalog;

use super::state::{apply, ApplyError, Event, SessionState};
use super::tick::{frame_tick, TickOutput};
use super::wire::{Effects, EventRecord, Hello, ServerMessage, Snapshot, PROTO_VERSION};

pub const DEFAULT_QUEUE_BOUND: usize = 1024;

pub type ClientId = u64;

/// Serialized record shared by every recipient.
pub type Outgoing = Arc<str>;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum HelloError {
    #[error("unsupported proto_version {0} (server speaks {PROTO_VERSION})")]
    ProtoVersion(u32),
    #[error("display_id must not be empty")]
    EmptyDisplayId,
}

impl HelloError {
    pub fn code(&self) -> &'static str {
        match self {
            HelloError::ProtoVersion(_) => "proto_version",
            HelloError::EmptyDisplayId => "bad_hello",
        }
    }
}

/// Receiving half handed to a transport.
#[derive(Debug)]
pub struct Connection {
    pub id: ClientId,
    pub rx: Receiver<Outgoing>,
}

struct ClientSlot {
    hello: Hello,
    tx: SyncSender<Outgoing>,
}

pub struct SessionServer {
    catalog: Arc<Catalog>,
    state: Arc<SessionState>,
    log: Vec<EventRecord>,
    clients: BTreeMap<ClientId, ClientSlot>,
    next_client: ClientId,
    queue_bound: usize,
    sink: Option<Box<dyn Write + Send>>,
    ticks: u64,
}

impl SessionServer {
    pub fn new(catalog: Arc<Catalog>) -> Self {
        let state = Arc::new(SessionState::initial(&catalog));
        Self {
            catalog,
            state,
            log: Vec::new(),
            clients: BTreeMap::new(),
            next_client: 1,
            queue_bound: DEFAULT_QUEUE_BOUND,
            sink: None,
            ticks: 0,
        }
    }

    pub fn with_queue_bound(mut self, bound: usize) -> Self {
        self.queue_bound = bound.max(1);
        self
    }

    /// Appends every record (starting with the current snapshot) to `sink`
    /// as newline-delimited JSON.
    pub fn with_event_log(mut self, mut sink: Box<dyn Write + Send>) -> std::io::Result<Self> {
        let header = ServerMessage::Snapshot(self.snapshot()).to_json();
        writeln!(sink, "{header}")?;
        self.sink = Some(sink);
        Ok(self)
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    /// Immutable view of the current state.
    pub fn state(&self) -> Arc<SessionState> {
        Arc::clone(&self.state)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::of(&self.catalog, &self.state)
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn client_count(&self) -> usize {
        self.clients.len()
    }

    pub fn is_connected(&self, id: ClientId) -> bool {
        self.clients.contains_key(&id)
    }

    pub fn hello(&self, id: ClientId) -> Option<&Hello> {
        self.clients.get(&id).map(|c| &c.hello)
    }

    /// Registers a client. Its queue starts with the current snapshot, so
    /// every later event it receives has a greater seq.
    pub fn connect(&mut self, hello: Hello) -> Result<Connection, HelloError> {
        if hello.proto_version != PROTO_VERSION {
            return Err(HelloError::ProtoVersion(hello.proto_version));
        }
        if hello.display_id.is_empty() {
            return Err(HelloError::EmptyDisplayId);
        }
        let (tx, rx) = sync_channel(self.queue_bound);
        let snapshot: Outgoing = ServerMessage::Snapshot(self.snapshot()).to_json().into();
        tx.try_send(snapshot).expect("fresh queue has room");
        let id = self.next_client;
        self.next_client += 1;
        log::info!("client {id} connected as {:?} {}", hello.role, hello.display_id);
        self.clients.insert(id, ClientSlot { hello, tx });
        Ok(Connection { id, rx })
    }

    pub fn disconnect(&mut self, id: ClientId) {
        if self.clients.remove(&id).is_some() {
            log::info!("client {id} disconnected");
        }
    }

    /// Sequences and applies `event`, then broadcasts it. Rejected events
    /// change nothing and are not broadcast.
    pub fn submit(&mut self, event: Event, t_ms: u64) -> Result<EventRecord, ApplyError> {
        let next = apply(&self.catalog, &self.state, &event, t_ms)?;
        let record = EventRecord {
            seq: next.seq,
            t_ms,
            event,
            effects: Effects {
                active_field_id: next.active_field_id.clone(),
                playback: next.playback.clone(),
            },
        };
        self.state = Arc::new(next);
        let json = ServerMessage::Event(record.clone()).to_json();
        if let Some(sink) = self.sink.as_mut() {
            if let Err(e) = writeln!(sink, "{json}") {
                log::error!("event log write failed: {e}");
            }
        }
        self.log.push(record.clone());
        self.broadcast(json.into());
        Ok(record)
    }

    /// Like [`submit`](Self::submit), but reports a rejection to `origin`.
    pub fn submit_from(&mut self, origin: ClientId, event: Event, t_ms: u64) -> Option<EventRecord> {
        match self.submit(event, t_ms) {
            Ok(rec) => Some(rec),
            Err(e) => {
                self.send_error(origin, e.code(), &e.to_string());
                None
            }
        }
    }

    pub fn send_error(&mut self, id: ClientId, code: &str, msg: &str) {
        let json: Outgoing = ServerMessage::Error {
            code: code.to_owned(),
            msg: msg.to_owned(),
        }
        .to_json()
        .into();
        if let Some(slot) = self.clients.get(&id) {
            if slot.tx.try_send(json).is_err() {
                self.disconnect(id);
            }
        }
    }

    /// Evaluates the tick at `now_ms` and broadcasts its frame. The returned
    /// frame is the one to send to LED gateways.
    pub fn tick(&mut self, now_ms: u64) -> (u64, TickOutput) {
        let out = frame_tick(&self.catalog, &self.state, now_ms);
        let tick = self.ticks;
        self.ticks += 1;
        let json = ServerMessage::Frame {
            tick,
            t_ms: now_ms,
            pixels: out.frame,
            vehicle: out.vehicle,
        }
        .to_json();
        self.broadcast(json.into());
        (tick, out)
    }

    pub fn flush_log(&mut self) -> std::io::Result<()> {
        match self.sink.as_mut() {
            Some(sink) => sink.flush(),
            None => Ok(()),
        }
    }

    /// Queues `msg` for every client; a client whose queue is full is
    /// disconnected without affecting the others.
    fn broadcast(&mut self, msg: Outgoing) {
        let mut dropped = Vec::new();
        for (&id, slot) in &self.clients {
            match slot.tx.try_send(Arc::clone(&msg)) {
                Ok(()) => {}
                Err(TrySendError::Full(_)) => {
                    log::warn!("client {id}: send queue over {} messages, disconnecting", self.queue_bound);
                    dropped.push(id);
                }
                Err(TrySendError::Disconnected(_)) => dropped.push(id),
            }
        }
        for id in dropped {
            self.disconnect(id);
        }
    }
}

impl Drop for SessionServer {
    fn drop(&mut self) {
        let _ = self.flush_log();
    }
}
