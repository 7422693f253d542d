use std::collections::BTreeMap;
use std::io::Write;
use std::sync::mpsc::Receiver;
use std::sync::{Arc, Mutex};

use ehmi::catalog::Catalog;
use ehmi::replay::replay_event_log;
use ehmi::session::{apply, ClientRole, Hello, Outgoing, ServerMessage, SessionServer, SessionState, PROTO_VERSION};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub fn state_json(state: &SessionState) -> String {
    serde_json::to_string(state).unwrap()
}

/// In-memory event log sink that stays readable after the hub takes it.
#[derive(Clone, Default)]
pub struct SharedBuf(Arc<Mutex<Vec<u8>>>);

impl SharedBuf {
    pub fn text(&self) -> String {
        String::from_utf8(self.0.lock().unwrap().clone()).unwrap()
    }
}

impl Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().write(buf)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

/// A client that only knows the wire: it rebuilds state from the snapshot
/// plus every event record it receives.
pub struct Mirror {
    pub rx: Receiver<Outgoing>,
    pub state: Option<SessionState>,
    last_seq: Option<u64>,
}

impl Mirror {
    pub fn new(rx: Receiver<Outgoing>) -> Self {
        Self { rx, state: None, last_seq: None }
    }

    /// Applies everything queued, comparing against the server's state at
    /// each seq reached.
    pub fn drain(&mut self, catalog: &Catalog, server_states: &BTreeMap<u64, String>) -> Result<usize, String> {
        let mut n = 0;
        while let Ok(msg) = self.rx.try_recv() {
            match serde_json::from_str::<ServerMessage>(&msg).map_err(|e| e.to_string())? {
                ServerMessage::Snapshot(s) => {
                    ensure!(self.state.is_none(), "second snapshot");
                    ensure!(s.state.seq == s.seq, "snapshot seq mismatch");
                    self.last_seq = Some(s.seq);
                    self.state = Some(s.state);
                }
                ServerMessage::Event(rec) => {
                    let prev = self.state.as_ref().ok_or("event before snapshot")?;
                    ensure!(Some(rec.seq - 1) == self.last_seq, "gap before seq {}", rec.seq);
                    let next = apply(catalog, prev, &rec.event, rec.t_ms).map_err(|e| e.to_string())?;
                    ensure!(next.seq == rec.seq, "seq {} applied to {}", rec.seq, next.seq);
                    ensure!(next.active_field_id == rec.effects.active_field_id, "effects differ at {}", rec.seq);
                    ensure!(next.playback == rec.effects.playback, "playback differs at {}", rec.seq);
                    self.last_seq = Some(rec.seq);
                    self.state = Some(next);
                }
                ServerMessage::Frame { .. } => {}
                ServerMessage::Error { code, msg } => return Err(format!("error {code}: {msg}")),
            }
            let st = self.state.as_ref().unwrap();
            ensure!(state_json(st) == server_states[&st.seq], "diverged at seq {}", st.seq);
            n += 1;
        }
        Ok(n)
    }
}

/// Three clients join at random points of a 200-event session and must
/// match the server byte for byte at every seq they reach; the event log
/// must then replay to the final state.
pub fn convergence_trial(catalog: &Arc<Catalog>, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sink = SharedBuf::default();
    let mut hub = SessionServer::new(Arc::clone(catalog))
        .with_event_log(Box::new(sink.clone()))
        .map_err(|e| e.to_string())?;
    let mut server_states = BTreeMap::new();
    server_states.insert(0, state_json(&hub.state()));
    let mut joins: Vec<usize> = (0..3).map(|_| rng.random_range(0..200)).collect();
    joins.sort();
    let mut mirrors: Vec<Mirror> = Vec::new();
    for i in 0..200 {
        while joins.first() == Some(&i) {
            joins.remove(0);
            let hello = Hello {
                role: ClientRole::TopView,
                display_id: format!("client-{}", mirrors.len()),
                proto_version: PROTO_VERSION,
            };
            mirrors.push(Mirror::new(hub.connect(hello).map_err(|e| e.to_string())?.rx));
        }
        if hub.submit(super::random_event(&mut rng), i as u64 * 40).is_ok() {
            server_states.insert(hub.state().seq, state_json(&hub.state()));
        }
        if i % 7 == 0 {
            hub.tick(i as u64 * 40);
        }
        // drain at random moments so that queues hold several records
        for m in mirrors.iter_mut().filter(|_| rng.random_bool(0.3)) {
            m.drain(catalog, &server_states)?;
        }
    }
    ensure!(hub.state().seq > 100, "generator too hostile: {}", hub.state().seq);
    let want = state_json(&hub.state());
    for m in &mut mirrors {
        m.drain(catalog, &server_states)?;
        ensure!(m.state.as_ref().map(state_json).as_ref() == Some(&want), "client ended elsewhere");
    }
    ensure!(mirrors.len() == 3, "only {} clients joined", mirrors.len());
    hub.flush_log().map_err(|e| e.to_string())?;
    let replayed = replay_event_log(catalog, &sink.text()).map_err(|e| e.to_string())?;
    ensure!(state_json(&replayed) == want, "event log replay differs");
    Ok(())
}
