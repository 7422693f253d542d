use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use ehmi::catalog::{Catalog, CatalogError};
use ehmi::clock::SystemClock;
use ehmi::gateway::Emulator;
use ehmi::net::{serve, NetConfig, NetError};
use ehmi::pattern::{bind_colors, eval, parse, Rgb};
use ehmi::replay::{self, Script};
use ehmi::session::{SessionServer, DEFAULT_TICK_HZ};

mod validate;

#[derive(Parser)]
#[command(name = "ehmi", version, about = "Tangible multi-display session server for LED light-pattern prototyping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the session server.
    Serve(ServeArgs),
    /// Check environment files and patterns; prints one finding per line.
    Validate(ValidateArgs),
    /// Evaluate one pattern at one time and print its 21 pixels.
    RenderPattern(RenderArgs),
    /// Run a scripted session headlessly on a fake clock.
    Replay(ReplayArgs),
    /// Receive LED packets and print accepted frames.
    Emulate(EmulateArgs),
}

#[derive(Args)]
struct SceneArgs {
    /// Environment file; repeat for more. The first is the starting one.
    #[arg(long = "env", required = true)]
    envs: Vec<PathBuf>,
    /// Pattern directory [default: `patterns` next to the first --env]
    #[arg(long)]
    patterns: Option<PathBuf>,
}

impl SceneArgs {
    fn load(&self) -> Result<Catalog, Failure> {
        let dir = self.patterns.clone().unwrap_or_else(|| {
            self.envs[0]
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("patterns")
        });
        Catalog::load(&self.envs, &dir).map_err(|e| match e {
            CatalogError::Library(ehmi::pattern::LibraryError::Parse { .. }) => Failure::parse(e),
            _ => Failure::config(e),
        })
    }
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Length-prefixed JSON state channel.
    #[arg(long, default_value = "127.0.0.1:7400")]
    listen: String,
    /// WebSocket state channel for browser clients.
    #[arg(long)]
    ws_listen: Option<String>,
    /// LED gateway UDP target; repeat for more.
    #[arg(long = "led-udp")]
    led_udp: Vec<String>,
    #[arg(long, default_value_t = 0)]
    universe: u8,
    #[arg(long, default_value_t = DEFAULT_TICK_HZ, value_parser = clap::value_parser!(u32).range(1..))]
    tick_hz: u32,
    /// Append every record as NDJSON, starting with a snapshot.
    #[arg(long)]
    event_log: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Environment files, pattern files or directories holding them.
    paths: Vec<PathBuf>,
    #[arg(long = "env")]
    envs: Vec<PathBuf>,
    #[arg(long)]
    patterns: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    file: PathBuf,
    /// Time in milliseconds.
    #[arg(long, default_value_t = 0)]
    t: u64,
    #[arg(long, default_value_t = 1.0)]
    brightness: f64,
    /// Colour override `param=#RRGGBB`; repeatable.
    #[arg(long = "bind", value_parser = parse_binding)]
    bind: Vec<(String, Rgb)>,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long)]
    script: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TICK_HZ, value_parser = clap::value_parser!(u32).range(1..))]
    tick_hz: u32,
    #[arg(long)]
    event_log: Option<PathBuf>,
    #[arg(long)]
    frame_log: Option<PathBuf>,
}

#[derive(Args)]
struct EmulateArgs {
    /// UDP endpoint to receive on.
    #[arg(long, default_value = "127.0.0.1:7500")]
    listen: String,
    /// Write the received-frame log here as NDJSON on exit.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Stop after this many milliseconds instead of waiting for a signal.
    #[arg(long)]
    duration_ms: Option<u64>,
}

fn parse_binding(s: &str) -> Result<(String, Rgb), String> {
    let (k, v) = s.split_once('=').ok_or("expected param=#RRGGBB")?;
    let rgb = v.parse::<Rgb>().map_err(|e| e.to_string())?;
    Ok((k.trim().to_owned(), rgb))
}

/// A failed command: exit code plus a one-line `class: message`.
struct Failure {
    code: u8,
    class: &'static str,
    msg: String,
}

impl Failure {
    fn new(code: u8, class: &'static str, msg: impl ToString) -> Self {
        Self {
            code,
            class,
            msg: msg.to_string().replace('\n', " "),
        }
    }

    fn config(msg: impl ToString) -> Self {
        Self::new(2, "config error", msg)
    }

    fn parse(msg: impl ToString) -> Self {
        Self::new(4, "parse error", msg)
    }

    fn io(msg: impl ToString) -> Self {
        Self::new(5, "io error", msg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(a) => cmd_serve(a),
        Command::Validate(a) => validate::run(&a.paths, &a.envs, a.patterns.as_deref()),
        Command::RenderPattern(a) => cmd_render(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Emulate(a) => cmd_emulate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}: {}", f.class, f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn resolve(addr: &str) -> Result<SocketAddr, Failure> {
    addr.to_socket_addrs()
        .ok()
        .and_then(|mut a| a.next())
        .ok_or_else(|| Failure::config(format!("cannot resolve address {addr:?}")))
}

fn signal_flag() -> Result<Arc<AtomicBool>, Failure> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = Arc::clone(&flag);
    ctrlc::set_handler(move || f.store(true, Ordering::SeqCst)).map_err(Failure::io)?;
    Ok(flag)
}

fn cmd_serve(a: ServeArgs) -> Result<u8, Failure> {
    let catalog = Arc::new(a.scene.load()?);
    let mut config = NetConfig::new(resolve(&a.listen)?);
    config.ws_listen = a.ws_listen.as_deref().map(resolve).transpose()?;
    config.led_targets = a.led_udp.iter().map(|s| resolve(s)).collect::<Result<_, _>>()?;
    config.universe = a.universe;
    config.tick_hz = a.tick_hz;

    let mut hub = SessionServer::new(catalog);
    if let Some(path) = &a.event_log {
        let file = File::create(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        hub = hub.with_event_log(Box::new(BufWriter::new(file))).map_err(Failure::io)?;
    }
    let running = serve(hub, config, Arc::new(SystemClock::new())).map_err(|e| match e {
        NetError::PortInUse(_) => Failure::new(3, "port in use", e),
        _ => Failure::io(e),
    })?;
    let stop = signal_flag()?;

    let mut out = io::stdout().lock();
    let ws = running.ws_addr().map(|a| format!(" ws={a}")).unwrap_or_default();
    let _ = writeln!(out, "ready tcp={}{ws} tick_hz={}", running.tcp_addr(), a.tick_hz);
    let _ = out.flush();
    drop(out);

    while !stop.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(50));
    }
    running.shutdown().map_err(Failure::io)?;
    Ok(0)
}

fn cmd_render(a: RenderArgs) -> Result<u8, Failure> {
    let source = std::fs::read_to_string(&a.file)
        .map_err(|e| Failure::io(format!("{}: {e}", a.file.display())))?;
    let program = parse(&source).map_err(|e| Failure::parse(format!("{}:{e}", a.file.display())))?;
    let bindings = bind_colors(&program, a.bind.iter().map(|(k, v)| (k.as_str(), *v)))
        .map_err(|e| Failure::new(4, "eval error", e))?;
    let frame = eval(&program, a.t, &bindings, a.brightness).map_err(|e| Failure::new(4, "eval error", e))?;
    println!("{}", frame.to_hex_line());
    Ok(0)
}

fn cmd_replay(a: ReplayArgs) -> Result<u8, Failure> {
    let catalog = Arc::new(a.scene.load()?);
    let text = std::fs::read_to_string(&a.script)
        .map_err(|e| Failure::io(format!("{}: {e}", a.script.display())))?;
    let script_err = |e: replay::ScriptError| Failure::new(4, "script error", format!("{}:{e}", a.script.display()));
    let script = Script::parse(&text).map_err(script_err)?;
    let out = replay::run(catalog, &script, a.tick_hz).map_err(script_err)?;
    for (path, body) in [(&a.event_log, &out.event_log), (&a.frame_log, &out.frame_log)] {
        if let Some(path) = path {
            std::fs::write(path, body).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        }
    }
    println!(
        "ticks={} events={} led_mismatches={}",
        out.ticks,
        out.final_state.seq,
        out.led_mismatches.len()
    );
    println!("sha256={}", out.hash());
    Ok(0)
}

fn cmd_emulate(a: EmulateArgs) -> Result<u8, Failure> {
    let addr = resolve(&a.listen)?;
    let emulator = Emulator::bind(addr).map_err(|e| match e.kind() {
        io::ErrorKind::AddrInUse => Failure::new(3, "port in use", format!("{addr}")),
        _ => Failure::io(format!("{addr}: {e}")),
    })?;
    let stop = signal_flag()?;
    println!("listening udp={}", emulator.local_addr());
    let start = Instant::now();
    let mut shown = 0;
    loop {
        let done = stop.load(Ordering::SeqCst)
            || a.duration_ms.is_some_and(|d| start.elapsed() >= Duration::from_millis(d));
        let log = emulator.snapshot();
        let mut out = io::stdout().lock();
        for f in &log.frames()[shown..] {
            let _ = writeln!(out, "{} {}", f.seq, f.pixels.to_hex_line());
        }
        let _ = out.flush();
        shown = log.len();
        if done {
            break;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    let log = emulator.stop();
    for f in &log.frames()[shown..] {
        println!("{} {}", f.seq, f.pixels.to_hex_line());
    }
    if let Some(path) = &a.log {
        let mut w = BufWriter::new(File::create(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?);
        log.write_ndjson(&mut w).and_then(|_| w.flush()).map_err(Failure::io)?;
    }
    println!("frames={} drops={} malformed={}", log.len(), log.drops(), log.malformed());
    Ok(0)
}
