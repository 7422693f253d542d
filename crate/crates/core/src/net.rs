//! Live transports around a [`SessionServer`]: length-prefixed TCP,
//! WebSocket, the tick thread and LED output.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError, TryRecvError};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Duration;

use thiserror::Error;
use tungstenite::{Message, WebSocket};

use crate::clock::Clock;
use crate::gateway::LedSender;
use crate::session::{
    read_record, tick_time_ms, write_record, ClientId, ClientMessage, Hello, Outgoing, ServerMessage,
    SessionServer, DEFAULT_TICK_HZ,
};
use crate::touch::TouchRouter;

const POLL: Duration = Duration::from_millis(20);
/// Time a new connection has to complete its handshake and hello.
const HANDSHAKE: Duration = Duration::from_secs(5);

#[derive(Clone, Debug)]
pub struct NetConfig {
    pub listen: SocketAddr,
    pub ws_listen: Option<SocketAddr>,
    pub led_targets: Vec<SocketAddr>,
    pub universe: u8,
    pub tick_hz: u32,
}

impl NetConfig {
    pub fn new(listen: SocketAddr) -> Self {
        Self {
            listen,
            ws_listen: None,
            led_targets: Vec::new(),
            universe: 0,
            tick_hz: DEFAULT_TICK_HZ,
        }
    }
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("port in use: {0}")]
    PortInUse(SocketAddr),
    #[error("{addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

struct Core {
    hub: SessionServer,
    router: TouchRouter,
}

impl Core {
    fn sync_router(&mut self) {
        let env = self.hub.state().environment_id.clone();
        if self.router.environment_id() != env {
            self.router = TouchRouter::new(self.hub.catalog(), &env);
        }
    }

    fn handle(&mut self, id: ClientId, msg: ClientMessage, now: u64) {
        match msg {
            ClientMessage::Hello(_) => self.hub.send_error(id, "bad_message", "hello already received"),
            ClientMessage::Event(ev) => {
                self.hub.submit_from(id, ev, now);
            }
            ClientMessage::Touches { display_id, points } => {
                self.sync_router();
                match self.router.touches(&display_id, now, &points) {
                    Ok(events) => {
                        for ev in events {
                            self.hub.submit_from(id, ev, now);
                        }
                    }
                    Err(e) => self.hub.send_error(id, "unknown_display", &e.to_string()),
                }
            }
        }
    }
}

#[derive(Clone)]
struct Shared {
    core: Arc<Mutex<Core>>,
    clock: Arc<dyn Clock>,
    stop: Arc<AtomicBool>,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Core> {
        self.core.lock().expect("session lock poisoned")
    }

    fn stopping(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }
}

/// A running server. Dropping it (or calling [`shutdown`](Self::shutdown))
/// stops every thread and flushes the event log.
pub struct Running {
    shared: Shared,
    tcp_addr: SocketAddr,
    ws_addr: Option<SocketAddr>,
    threads: Vec<JoinHandle<()>>,
}

fn bind(addr: SocketAddr) -> Result<TcpListener, NetError> {
    let l = TcpListener::bind(addr).map_err(|source| match source.kind() {
        io::ErrorKind::AddrInUse => NetError::PortInUse(addr),
        _ => NetError::Bind { addr, source },
    })?;
    l.set_nonblocking(true)?;
    Ok(l)
}

pub fn serve(hub: SessionServer, config: NetConfig, clock: Arc<dyn Clock>) -> Result<Running, NetError> {
    let tcp = bind(config.listen)?;
    let ws = config.ws_listen.map(bind).transpose()?;
    let tcp_addr = tcp.local_addr()?;
    let ws_addr = ws.as_ref().map(|l| l.local_addr()).transpose()?;
    let led = if config.led_targets.is_empty() {
        None
    } else {
        Some(LedSender::new(config.led_targets.clone(), config.universe)?)
    };

    let env = hub.state().environment_id.clone();
    let router = TouchRouter::new(hub.catalog(), &env);
    let shared = Shared {
        core: Arc::new(Mutex::new(Core { hub, router })),
        clock,
        stop: Arc::new(AtomicBool::new(false)),
    };

    let mut threads = Vec::new();
    let s = shared.clone();
    threads.push(spawn("accept-tcp", move || accept_loop(tcp, s, Transport::Tcp))?);
    if let Some(ws) = ws {
        let s = shared.clone();
        threads.push(spawn("accept-ws", move || accept_loop(ws, s, Transport::WebSocket))?);
    }
    let s = shared.clone();
    let hz = config.tick_hz.max(1);
    threads.push(spawn("tick", move || tick_loop(s, hz, led))?);

    Ok(Running {
        shared,
        tcp_addr,
        ws_addr,
        threads,
    })
}

impl Running {
    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    /// Runs `f` with the session held.
    pub fn with_session<R>(&self, f: impl FnOnce(&mut SessionServer) -> R) -> R {
        f(&mut self.shared.lock().hub)
    }

    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.shared.stop)
    }

    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop_threads();
        self.shared.lock().hub.flush_log()
    }

    fn stop_threads(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn spawn(name: &str, f: impl FnOnce() + Send + 'static) -> io::Result<JoinHandle<()>> {
    std::thread::Builder::new().name(name.into()).spawn(f)
}

#[derive(Clone, Copy)]
enum Transport {
    Tcp,
    WebSocket,
}

fn accept_loop(listener: TcpListener, shared: Shared, transport: Transport) {
    let mut clients: Vec<JoinHandle<()>> = Vec::new();
    while !shared.stopping() {
        match listener.accept() {
            Ok((stream, peer)) => {
                let s = shared.clone();
                let handle = spawn("client", move || {
                    let result = match transport {
                        Transport::Tcp => tcp_client(stream, s),
                        Transport::WebSocket => ws_client(stream, s),
                    };
                    if let Err(e) = result {
                        log::debug!("client {peer}: {e}");
                    }
                });
                match handle {
                    Ok(h) => clients.push(h),
                    Err(e) => log::error!("cannot spawn client thread: {e}"),
                }
                clients.retain(|h| !h.is_finished());
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(POLL),
            Err(e) => {
                log::warn!("accept failed: {e}");
                std::thread::sleep(POLL);
            }
        }
    }
    for h in clients {
        let _ = h.join();
    }
}

fn parse_client(text: &str) -> Result<ClientMessage, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

fn error_json(code: &str, msg: &str) -> String {
    ServerMessage::Error {
        code: code.into(),
        msg: msg.into(),
    }
    .to_json()
}

/// Validates the first message and registers the client, or returns the
/// error record to send before closing.
fn register(shared: &Shared, first: Option<&str>) -> Result<(ClientId, Receiver<Outgoing>), String> {
    let hello: Hello = match first.map(parse_client) {
        Some(Ok(ClientMessage::Hello(h))) => h,
        Some(Ok(_)) => return Err(error_json("bad_message", "first message must be hello")),
        Some(Err(e)) => return Err(error_json("bad_message", &e)),
        None => return Err(error_json("bad_message", "no hello")),
    };
    let conn = shared
        .lock()
        .hub
        .connect(hello)
        .map_err(|e| error_json(e.code(), &e.to_string()))?;
    Ok((conn.id, conn.rx))
}

fn tcp_client(stream: TcpStream, shared: Shared) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream.try_clone()?);
    stream.set_read_timeout(Some(HANDSHAKE))?;
    let first = read_record(&mut reader)?;
    stream.set_read_timeout(None)?;
    let (id, rx) = match register(&shared, first.as_deref()) {
        Ok(c) => c,
        Err(record) => {
            write_record(&mut writer, &record)?;
            return Ok(());
        }
    };

    let writer_stop = Arc::clone(&shared.stop);
    let write_half = stream.try_clone()?;
    let writer_thread = spawn("client-writer", move || {
        while !writer_stop.load(Ordering::SeqCst) {
            match rx.recv_timeout(POLL * 5) {
                Ok(msg) => {
                    if write_record(&mut writer, &msg).is_err() {
                        break;
                    }
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        let _ = write_half.shutdown(Shutdown::Both);
    })?;

    // Blocking reads; the writer shuts the socket down on stop or disconnect.
    let result = loop {
        match read_record(&mut reader) {
            Ok(Some(text)) => match parse_client(&text) {
                Ok(msg) => {
                    let now = shared.clock.now_ms();
                    shared.lock().handle(id, msg, now);
                }
                Err(e) => shared.lock().hub.send_error(id, "bad_message", &e),
            },
            Ok(None) => break Ok(()),
            Err(_) if shared.stopping() => break Ok(()),
            Err(e) => break Err(e),
        }
    };
    shared.lock().hub.disconnect(id);
    let _ = stream.shutdown(Shutdown::Both);
    let _ = writer_thread.join();
    result
}

fn ws_client(stream: TcpStream, shared: Shared) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(HANDSHAKE))?;
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;

    let deadline = std::time::Instant::now() + HANDSHAKE;
    let first = loop {
        if shared.stopping() || std::time::Instant::now() > deadline {
            break None;
        }
        match ws_read_text(&mut ws) {
            Ok(Some(t)) => break Some(t),
            Ok(None) => {}
            Err(WsEnd::Closed) => break None,
            Err(WsEnd::Io(e)) => return Err(e),
        }
    };
    let (id, rx) = match register(&shared, first.as_deref()) {
        Ok(c) => c,
        Err(record) => {
            let _ = ws.send(Message::text(record));
            let _ = ws.close(None);
            return Ok(());
        }
    };

    let result = loop {
        if shared.stopping() {
            let _ = ws.close(None);
            break Ok(());
        }
        let mut gone = false;
        loop {
            match rx.try_recv() {
                Ok(msg) => {
                    if let Err(e) = ws.send(Message::text(msg.as_ref())) {
                        log::debug!("ws send: {e}");
                        gone = true;
                        break;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    gone = true;
                    break;
                }
            }
        }
        if gone {
            let _ = ws.close(None);
            break Ok(());
        }
        match ws_read_text(&mut ws) {
            Ok(Some(text)) => match parse_client(&text) {
                Ok(msg) => {
                    let now = shared.clock.now_ms();
                    shared.lock().handle(id, msg, now);
                }
                Err(e) => shared.lock().hub.send_error(id, "bad_message", &e),
            },
            Ok(None) => {}
            Err(WsEnd::Closed) => break Ok(()),
            Err(WsEnd::Io(e)) => break Err(e),
        }
    };
    shared.lock().hub.disconnect(id);
    result
}

enum WsEnd {
    Closed,
    Io(io::Error),
}

/// One text message, `None` on timeout or non-text frames.
fn ws_read_text(ws: &mut WebSocket<TcpStream>) -> Result<Option<String>, WsEnd> {
    match ws.read() {
        Ok(Message::Text(t)) => Ok(Some(t.as_str().to_owned())),
        Ok(Message::Binary(b)) => String::from_utf8(b.to_vec())
            .map(Some)
            .map_err(|e| WsEnd::Io(io::Error::new(io::ErrorKind::InvalidData, e))),
        Ok(Message::Close(_)) => Err(WsEnd::Closed),
        Ok(_) => Ok(None),
        Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
            Ok(None)
        }
        Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => Err(WsEnd::Closed),
        Err(e) => Err(WsEnd::Io(io::Error::other(e.to_string()))),
    }
}

fn tick_loop(shared: Shared, hz: u32, mut led: Option<LedSender>) {
    let start = shared.clock.now_ms();
    let mut k = 0u64;
    while !shared.stopping() {
        let due = start + tick_time_ms(k, hz);
        let now = shared.clock.now_ms();
        if now < due {
            std::thread::sleep(Duration::from_millis((due - now).min(POLL.as_millis() as u64)));
            continue;
        }
        let frame = {
            let mut core = shared.lock();
            core.sync_router();
            for ev in core.router.expire(now) {
                if let Err(e) = core.hub.submit(ev, now) {
                    log::debug!("removal rejected: {e}");
                }
            }
            core.hub.tick(now).1.frame
        };
        if let Some(led) = led.as_mut() {
            led.send(&frame);
        }
        k += 1;
        // after a stall, skip ticks that are already past rather than bursting
        let behind = shared.clock.now_ms().saturating_sub(start);
        while start + tick_time_ms(k, hz) + 1000 / hz as u64 <= start + behind {
            k += 1;
        }
    }
}
