//! Authoritative session state, its event protocol and the broadcast hub.

mod hub;
mod state;
mod tick;
mod wire;

pub use hub::{ClientId, Connection, HelloError, Outgoing, SessionServer, DEFAULT_QUEUE_BOUND};
pub use state::{apply, ApplyError, Event, Playback, SessionState};
pub use tick::{frame_tick, tick_time_ms, TickOutput, DEFAULT_TICK_HZ};
pub use wire::{
    read_record, write_record, ClientMessage, ClientRole, Effects, EventRecord, FieldView, Hello, ServerMessage,
    Snapshot, MAX_RECORD_BYTES, PROTO_VERSION,
};
