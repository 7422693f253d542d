//! `validate`: one finding per line as `path[:line:col]: kind: message`,
//! then `N findings`.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use ehmi::catalog::Catalog;
use ehmi::pattern::{parse, PatternLibrary};
use ehmi::scene::{load_environment, ConfigError, Environment};

use crate::Failure;

#[derive(Debug)]
struct Finding {
    path: PathBuf,
    pos: Option<(usize, usize)>,
    kind: &'static str,
    message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some((l, c)) = self.pos {
            write!(f, ":{l}:{c}")?;
        }
        write!(f, ": {}: {}", self.kind, self.message.replace('\n', " "))
    }
}

fn has_ext(p: &Path, ext: &str) -> bool {
    p.extension().is_some_and(|e| e == ext)
}

/// Expands directories into the `.toml` and `.pattern` files below them.
fn collect(paths: &[PathBuf], envs: &mut Vec<PathBuf>, patterns: &mut Vec<PathBuf>) -> Result<(), Failure> {
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = WalkDir::new(p)
                .into_iter()
                .filter_map(Result::ok)
                .filter(|e| e.file_type().is_file())
                .map(|e| e.into_path())
                .collect();
            files.sort();
            for f in files {
                if has_ext(&f, "toml") {
                    envs.push(f);
                } else if has_ext(&f, "pattern") {
                    patterns.push(f);
                }
            }
        } else if has_ext(p, "pattern") {
            patterns.push(p.clone());
        } else if p.exists() {
            envs.push(p.clone());
        } else {
            return Err(Failure::config(format!("{}: no such file or directory", p.display())));
        }
    }
    Ok(())
}

pub fn run(paths: &[PathBuf], env_flags: &[PathBuf], pattern_dir: Option<&Path>) -> Result<u8, Failure> {
    let mut env_paths = Vec::new();
    let mut pattern_paths = Vec::new();
    let mut inputs: Vec<PathBuf> = paths.to_vec();
    inputs.extend(env_flags.iter().cloned());
    inputs.extend(pattern_dir.map(Path::to_path_buf));
    collect(&inputs, &mut env_paths, &mut pattern_paths)?;
    if env_paths.is_empty() && pattern_paths.is_empty() {
        return Err(Failure::config("nothing to validate"));
    }

    let mut findings = Vec::new();
    let mut envs: Vec<Environment> = Vec::new();
    let mut env_ok = true;
    for path in &env_paths {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                env_ok = false;
                findings.push(Finding {
                    path: path.clone(),
                    pos: None,
                    kind: "io",
                    message: e.to_string(),
                });
                continue;
            }
        };
        match load_environment(&text) {
            Ok(env) => envs.push(env),
            Err(e) => {
                env_ok = false;
                let (pos, message) = match &e {
                    ConfigError::Parse { line, column, message } => (Some((*line, *column)), message.clone()),
                    ConfigError::Validation(v) => (None, v.to_string()),
                };
                findings.push(Finding {
                    path: path.clone(),
                    pos,
                    kind: "config",
                    message,
                });
            }
        }
    }

    let mut library = PatternLibrary::new();
    let mut patterns_ok = true;
    for path in &pattern_paths {
        let parsed = std::fs::read_to_string(path)
            .map_err(|e| (None, e.to_string()))
            .and_then(|src| parse(&src).map_err(|e| (Some((e.line, e.column)), e.kind.to_string())));
        match parsed {
            Ok(program) => {
                if let Err(e) = library.insert(program) {
                    patterns_ok = false;
                    findings.push(Finding {
                        path: path.clone(),
                        pos: None,
                        kind: "pattern",
                        message: e.to_string(),
                    });
                }
            }
            Err((pos, message)) => {
                patterns_ok = false;
                findings.push(Finding {
                    path: path.clone(),
                    pos,
                    kind: "pattern",
                    message,
                });
            }
        }
    }

    // Cross-file checks only make sense once every file loaded on its own.
    if env_ok && patterns_ok && !envs.is_empty() {
        if let Err(e) = Catalog::new(envs, library) {
            findings.push(Finding {
                path: env_paths[0].clone(),
                pos: None,
                kind: "catalog",
                message: e.to_string(),
            });
        }
    }

    let mut out = io::stdout().lock();
    for f in &findings {
        let _ = writeln!(out, "{f}");
    }
    let _ = writeln!(out, "{} findings", findings.len());
    Ok(if findings.is_empty() { 0 } else { 1 })
}
