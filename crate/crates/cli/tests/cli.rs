use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use ehmi::gateway::LedSender;
use ehmi::pattern::{Frame, Rgb};

fn scenes() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenes")
}

fn ehmi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehmi")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

/// Kills the child on drop so a failed assertion does not leak a server.
struct Guard(Child);

impl Drop for Guard {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn first_line(child: &mut Child) -> String {
    let mut line = String::new();
    BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
    line.trim().to_owned()
}

#[test]
fn missing_environment_is_a_config_error() {
    let o = ehmi(&["serve", "--env", "/nonexistent/env.toml", "--listen", "127.0.0.1:0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("config error:"), "{}", stderr(&o));
}

#[test]
fn second_server_on_same_port_reports_port_in_use() {
    let env = scenes().join("shared_space.toml");
    let mut first = Guard(
        Command::new(env!("CARGO_BIN_EXE_ehmi"))
            .args(["serve", "--env", p(&env), "--listen", "127.0.0.1:0"])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap(),
    );
    let ready = first_line(&mut first.0);
    let addr = ready
        .split_whitespace()
        .find_map(|w| w.strip_prefix("tcp="))
        .unwrap_or_else(|| panic!("{ready}"));
    let o = ehmi(&["serve", "--env", p(&env), "--listen", addr]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("port in use:"), "{}", stderr(&o));
}

#[test]
fn bundled_scenes_validate_clean() {
    let o = ehmi(&["validate", p(&scenes())]);
    assert_eq!(stdout(&o).trim(), "0 findings");
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn duplicate_param_is_reported_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "dup.pattern",
        "pattern \"dup\" {\n  param color c = #FF0000\n  param color c = #00FF00\n  duration 100ms\n  layer solid(c)\n}\n",
    );
    let o = ehmi(&["validate", p(&f)]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let finding = out.lines().next().unwrap();
    assert!(finding.starts_with(&format!("{}:3:", f.display())), "{finding}");
    assert!(finding.contains("pattern:"), "{finding}");
    assert!(out.ends_with("1 findings\n"), "{out}");
}

#[test]
fn inseparable_tangibles_name_both() {
    let dir = tempfile::tempdir().unwrap();
    let env = std::fs::read_to_string(scenes().join("shared_space.toml"))
        .unwrap()
        .replace("[[0.0, 0.0], [40.0, 0.0], [0.0, 56.0]]", "[[0.0, 0.0], [31.0, 0.0], [0.0, 41.0]]");
    let f = write(dir.path(), "env.toml", &env);
    let o = ehmi(&["validate", p(&f)]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("car") && out.contains("view") && out.contains("separab"), "{out}");
}

#[test]
fn render_examples() {
    let dir = tempfile::tempdir().unwrap();
    let solid = write(dir.path(), "red.pattern", "pattern \"red\" { param color c = #FF0000 duration 1000ms layer solid(c) }");
    let blink = write(
        dir.path(),
        "blink.pattern",
        "pattern \"b\" { param color c = #FF0000 duration 1000ms layer blink(c, 1000ms, 0.5) }",
    );
    let line = |rgb: &str| vec![rgb; 21].join(" ");

    let o = ehmi(&["render-pattern", p(&solid)]);
    assert_eq!(stdout(&o).trim(), line("FF0000"));
    let o = ehmi(&["render-pattern", p(&solid), "--brightness", "0.5"]);
    assert_eq!(stdout(&o).trim(), line("800000"));
    let o = ehmi(&["render-pattern", p(&solid), "--bind", "c=#00FF00"]);
    assert_eq!(stdout(&o).trim(), line("00FF00"));
    let o = ehmi(&["render-pattern", p(&blink), "--t", "750"]);
    assert_eq!(stdout(&o).trim(), line("000000"));

    let o = ehmi(&["render-pattern", p(&solid), "--bind", "nope=#00FF00"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("eval error:"), "{}", stderr(&o));
    let broken = write(dir.path(), "broken.pattern", "pattern \"x\" {\n  duration 0ms\n}\n");
    let o = ehmi(&["render-pattern", p(&broken)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("parse error:"), "{}", stderr(&o));
}

#[test]
fn bad_script_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let script = write(
        dir.path(),
        "bad.script",
        "# ok\n0 BrightnessChanged {\"value\": 0.5}\n\n120 BrightnessChanged {\"value\": \n",
    );
    let env = scenes().join("shared_space.toml");
    let o = ehmi(&["replay", "--env", p(&env), "--script", p(&script)]);
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.starts_with("script error:") && err.contains("line 4"), "{err}");
}

#[test]
fn replay_writes_logs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (events, frames) = (dir.path().join("e.ndjson"), dir.path().join("f.ndjson"));
    let s = scenes();
    let o = ehmi(&[
        "replay",
        "--env",
        p(&s.join("shared_space.toml")),
        "--env",
        p(&s.join("street.toml")),
        "--script",
        p(&s.join("scripts/demo.script")),
        "--event-log",
        p(&events),
        "--frame-log",
        p(&frames),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("ticks=240 events=8 led_mismatches=0\nsha256="), "{out}");
    assert_eq!(std::fs::read_to_string(&frames).unwrap().lines().count(), 240);
    assert_eq!(std::fs::read_to_string(&events).unwrap().lines().count(), 9);
}

#[test]
fn emulator_prints_received_frames() {
    let mut child = Guard(
        Command::new(env!("CARGO_BIN_EXE_ehmi"))
            .args(["emulate", "--listen", "127.0.0.1:0", "--duration-ms", "1500"])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap(),
    );
    let mut reader = BufReader::new(child.0.stdout.take().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening udp=").unwrap().parse().unwrap();
    let mut tx = LedSender::new(vec![addr], 0).unwrap();
    for _ in 0..5 {
        tx.send(&Frame::filled(Rgb::new(1, 2, 3)));
        std::thread::sleep(Duration::from_millis(10));
    }
    let rest: Vec<String> = reader.lines().map(Result::unwrap).collect();
    assert!(child.0.wait().unwrap().success());
    assert_eq!(rest.last().unwrap(), "frames=5 drops=0 malformed=0");
    assert_eq!(rest[0], format!("0 {}", vec!["010203"; 21].join(" ")));
}
