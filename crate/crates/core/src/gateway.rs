//! LED frames over UDP, plus a loopback emulator standing in for the strip
//! controller.
//!
//! Packet layout (73 bytes):
//!
//! | bytes | field    | value                      |
//! |-------|----------|----------------------------|
//! | 0..4  | magic    | `TMDT`                     |
//! | 4     | version  | 1                          |
//! | 5..7  | seq      | u16 big-endian             |
//! | 7     | universe | u8                         |
//! | 8..10 | length   | u16 big-endian, always 63  |
//! | 10..  | payload  | 21 × RGB in U-path order   |

use std::io::{self, Write};
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::{Frame, PIXELS};

pub const MAGIC: [u8; 4] = *b"TMDT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 10;
pub const PAYLOAD_LEN: usize = PIXELS * 3;
pub const PACKET_LEN: usize = HEADER_LEN + PAYLOAD_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version")]
    UnsupportedVersion(u8),
    #[error("length mismatch")]
    LengthMismatch(u16),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Packet {
    pub frame: Frame,
    pub seq: u16,
    pub universe: u8,
}

pub fn encode(frame: &Frame, seq: u16, universe: u8) -> [u8; PACKET_LEN] {
    let mut out = [0u8; PACKET_LEN];
    out[..4].copy_from_slice(&MAGIC);
    out[4] = VERSION;
    out[5..7].copy_from_slice(&seq.to_be_bytes());
    out[7] = universe;
    out[8..10].copy_from_slice(&(PAYLOAD_LEN as u16).to_be_bytes());
    out[HEADER_LEN..].copy_from_slice(&frame.to_bytes());
    out
}

/// Header checks run in wire order; a full header with a short payload is
/// `Truncated`, a declared length other than 63 is `LengthMismatch`.
/// Trailing bytes after the payload are also a length mismatch.
pub fn decode(bytes: &[u8]) -> Result<Packet, DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::Truncated);
    }
    if bytes[..4] != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(DecodeError::UnsupportedVersion(bytes[4]));
    }
    let seq = u16::from_be_bytes([bytes[5], bytes[6]]);
    let universe = bytes[7];
    let declared = u16::from_be_bytes([bytes[8], bytes[9]]);
    if declared as usize != PAYLOAD_LEN {
        return Err(DecodeError::LengthMismatch(declared));
    }
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < PAYLOAD_LEN {
        return Err(DecodeError::Truncated);
    }
    if payload.len() > PAYLOAD_LEN {
        return Err(DecodeError::LengthMismatch(declared));
    }
    let frame = Frame::from_bytes(payload.try_into().expect("length checked"));
    Ok(Packet { frame, seq, universe })
}

/// Serial-number comparison over u16: `a` is newer than `b` when it is
/// ahead by 1..=32767. Equal seqs and the exact half-way point are not.
pub fn serial_newer(a: u16, b: u16) -> bool {
    let d = a.wrapping_sub(b);
    d != 0 && d < 0x8000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedFrame {
    pub recv_ms: u64,
    pub seq: u16,
    pub universe: u8,
    pub pixels: Frame,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ingest {
    Accepted,
    Stale,
}

/// Frames accepted by a receiver, in arrival order with strictly increasing
/// seqs under serial comparison.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EmulatorLog {
    frames: Vec<LoggedFrame>,
    drops: u64,
    malformed: u64,
}

impl EmulatorLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accept(&mut self, packet: Packet, recv_ms: u64) -> Ingest {
        if let Some(last) = self.frames.last() {
            if !serial_newer(packet.seq, last.seq) {
                self.drops += 1;
                return Ingest::Stale;
            }
        }
        self.frames.push(LoggedFrame {
            recv_ms,
            seq: packet.seq,
            universe: packet.universe,
            pixels: packet.frame,
        });
        Ingest::Accepted
    }

    /// Decodes and accepts one datagram. Undecodable datagrams are counted
    /// separately from stale ones.
    pub fn ingest(&mut self, datagram: &[u8], recv_ms: u64) -> Result<Ingest, DecodeError> {
        match decode(datagram) {
            Ok(p) => Ok(self.accept(p, recv_ms)),
            Err(e) => {
                self.malformed += 1;
                Err(e)
            }
        }
    }

    pub fn frames(&self) -> &[LoggedFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Stale packets dropped.
    pub fn drops(&self) -> u64 {
        self.drops
    }

    pub fn malformed(&self) -> u64 {
        self.malformed
    }

    pub fn latest(&self) -> Option<&LoggedFrame> {
        self.frames.last()
    }

    /// The frame being shown at `t_ms`: the last one received at or before it.
    pub fn frame_at(&self, t_ms: u64) -> Option<&LoggedFrame> {
        let n = self.frames.partition_point(|f| f.recv_ms <= t_ms);
        n.checked_sub(1).map(|i| &self.frames[i])
    }

    /// One JSON record per accepted frame.
    pub fn write_ndjson(&self, w: &mut impl Write) -> io::Result<()> {
        for f in &self.frames {
            serde_json::to_writer(&mut *w, f)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// UDP receiver appending to a shared [`EmulatorLog`]. Stops on drop.
pub struct Emulator {
    addr: SocketAddr,
    log: Arc<Mutex<EmulatorLog>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Emulator {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let addr = socket.local_addr()?;
        let log = Arc::new(Mutex::new(EmulatorLog::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let log = Arc::clone(&log);
            let stop = Arc::clone(&stop);
            std::thread::Builder::new()
                .name("led-emulator".into())
                .spawn(move || receive_loop(socket, log, stop))?
        };
        Ok(Self {
            addr,
            log,
            stop,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Copy of the log as it stands now.
    pub fn snapshot(&self) -> EmulatorLog {
        self.log.lock().expect("emulator log poisoned").clone()
    }

    pub fn latest(&self) -> Option<LoggedFrame> {
        self.log.lock().expect("emulator log poisoned").latest().copied()
    }

    pub fn stop(mut self) -> EmulatorLog {
        self.shutdown();
        self.snapshot()
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Emulator {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn receive_loop(socket: UdpSocket, log: Arc<Mutex<EmulatorLog>>, stop: Arc<AtomicBool>) {
    let start = Instant::now();
    // one byte of slack so oversized datagrams are seen as such
    let mut buf = [0u8; PACKET_LEN + 1];
    while !stop.load(Ordering::SeqCst) {
        match socket.recv_from(&mut buf) {
            Ok((n, from)) => {
                let now = start.elapsed().as_millis() as u64;
                let result = log.lock().expect("emulator log poisoned").ingest(&buf[..n], now);
                if let Err(e) = result {
                    log::debug!("emulator: {from}: {e}");
                }
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => {
                log::warn!("emulator receive failed: {e}");
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    }
}

/// Sends each frame to every target with a shared, wrapping seq.
pub struct LedSender {
    socket: UdpSocket,
    targets: Vec<SocketAddr>,
    seq: u16,
    universe: u8,
}

impl LedSender {
    pub fn new(targets: Vec<SocketAddr>, universe: u8) -> io::Result<Self> {
        let any_v6 = targets.iter().any(|t| t.is_ipv6());
        let socket = UdpSocket::bind(if any_v6 { "[::]:0" } else { "0.0.0.0:0" })?;
        Ok(Self {
            socket,
            targets,
            seq: 0,
            universe,
        })
    }

    pub fn targets(&self) -> &[SocketAddr] {
        &self.targets
    }

    /// Seq the next frame will carry.
    pub fn next_seq(&self) -> u16 {
        self.seq
    }

    pub fn set_next_seq(&mut self, seq: u16) {
        self.seq = seq;
    }

    /// Sends `frame` and returns its seq. Per-target send failures are
    /// logged; the seq advances regardless.
    pub fn send(&mut self, frame: &Frame) -> u16 {
        let seq = self.seq;
        let packet = encode(frame, seq, self.universe);
        for t in &self.targets {
            if let Err(e) = self.socket.send_to(&packet, t) {
                log::warn!("led send to {t}: {e}");
            }
        }
        self.seq = self.seq.wrapping_add(1);
        seq
    }
}
