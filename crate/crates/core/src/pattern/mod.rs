//! Light-pattern DSL for the 21-pixel "U" display.
//!
//! ```text
//! pattern "sweep-left" {
//!   param color band = #FFA000
//!   duration 2100ms
//!   layer solid(#101010)
//!   layer sweep(band, right, 3, 2100ms)
//! }
//! ```

mod eval;
mod lexer;
mod parser;
mod print;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{eval, EvalError};
pub use parser::{parse, ParseError, ParseErrorKind};

/// Number of individually controllable lights on the vehicle.
pub const PIXELS: usize = 21;
/// Lights per strip; the "U" is three strips.
pub const STRIP_LEN: usize = 7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const BLACK: Rgb = Rgb::new(0, 0, 0);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub fn channels(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    /// `RRGGBB`, upper case, no prefix.
    pub fn hex(self) -> String {
        format!("{:02X}{:02X}{:02X}", self.r, self.g, self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid colour {0:?}: expected #RRGGBB")]
pub struct ColorParseError(pub String);

impl FromStr for Rgb {
    type Err = ColorParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(ColorParseError(s.to_owned()));
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).expect("checked hex");
        Ok(Rgb::new(byte(0), byte(2), byte(4)))
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.hex())
    }
}

impl Serialize for Rgb {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One complete state of the display, in U-path index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Frame([Rgb; PIXELS]);

impl Default for Frame {
    fn default() -> Self {
        Self::black()
    }
}

impl Frame {
    pub fn black() -> Self {
        Frame([Rgb::BLACK; PIXELS])
    }

    pub fn filled(color: Rgb) -> Self {
        Frame([color; PIXELS])
    }

    pub fn from_pixels(pixels: [Rgb; PIXELS]) -> Self {
        Frame(pixels)
    }

    pub fn pixels(&self) -> &[Rgb; PIXELS] {
        &self.0
    }

    pub fn is_black(&self) -> bool {
        self.0.iter().all(|&p| p == Rgb::BLACK)
    }

    /// 63 channel bytes, RGB per pixel.
    pub fn to_bytes(&self) -> [u8; PIXELS * 3] {
        let mut out = [0u8; PIXELS * 3];
        for (chunk, px) in out.chunks_exact_mut(3).zip(&self.0) {
            chunk.copy_from_slice(&px.channels());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; PIXELS * 3]) -> Self {
        let mut pixels = [Rgb::BLACK; PIXELS];
        for (px, chunk) in pixels.iter_mut().zip(bytes.chunks_exact(3)) {
            *px = Rgb::new(chunk[0], chunk[1], chunk[2]);
        }
        Frame(pixels)
    }

    /// Golden-fixture line: 21 space-separated `RRGGBB` triples.
    pub fn to_hex_line(&self) -> String {
        self.0.iter().map(|p| p.hex()).collect::<Vec<_>>().join(" ")
    }
}

impl FromStr for Frame {
    type Err = ColorParseError;
    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != PIXELS {
            return Err(ColorParseError(line.to_owned()));
        }
        let mut pixels = [Rgb::BLACK; PIXELS];
        for (px, part) in pixels.iter_mut().zip(parts) {
            *px = part.parse()?;
        }
        Ok(Frame(pixels))
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex_line())
    }
}

impl Serialize for Frame {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.iter().map(|p| p.hex()).collect::<String>())
    }
}

impl<'de> Deserialize<'de> for Frame {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.len() != PIXELS * 6 || !s.is_ascii() {
            return Err(serde::de::Error::custom("frame must be 126 hex digits"));
        }
        let mut pixels = [Rgb::BLACK; PIXELS];
        for (i, px) in pixels.iter_mut().enumerate() {
            *px = s[i * 6..i * 6 + 6].parse().map_err(serde::de::Error::custom)?;
        }
        Ok(Frame(pixels))
    }
}

/// The three strips of the "U", seen from above with the front at the top.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strip {
    /// Rear to front.
    Left,
    /// Left to right.
    Front,
    /// Front to rear.
    Right,
}

/// Mapping between U-path indices and (strip, position-on-strip).
pub struct DisplayGeometry;

impl DisplayGeometry {
    pub fn locate(index: usize) -> Option<(Strip, usize)> {
        match index {
            0..=6 => Some((Strip::Left, index)),
            7..=13 => Some((Strip::Front, index - 7)),
            14..=20 => Some((Strip::Right, index - 14)),
            _ => None,
        }
    }

    pub fn index(strip: Strip, offset: usize) -> Option<usize> {
        if offset >= STRIP_LEN {
            return None;
        }
        Some(match strip {
            Strip::Left => offset,
            Strip::Front => STRIP_LEN + offset,
            Strip::Right => 2 * STRIP_LEN + offset,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorRef {
    Param(String),
    Literal(Rgb),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFrom {
    /// Starts at index 0.
    Left,
    /// Starts at index 20.
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Solid {
        color: ColorRef,
    },
    Blink {
        color: ColorRef,
        period_ms: u64,
        duty: f64,
    },
    Pulse {
        color: ColorRef,
        period_ms: u64,
        min: f64,
        max: f64,
    },
    Sweep {
        color: ColorRef,
        from: SweepFrom,
        width_px: u32,
        period_ms: u64,
    },
    Segment {
        lo: u8,
        hi: u8,
        color: ColorRef,
    },
    Off,
}

impl Primitive {
    pub fn color(&self) -> Option<&ColorRef> {
        match self {
            Primitive::Solid { color }
            | Primitive::Blink { color, .. }
            | Primitive::Pulse { color, .. }
            | Primitive::Sweep { color, .. }
            | Primitive::Segment { color, .. } => Some(color),
            Primitive::Off => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub default: Rgb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternProgram {
    pub id: String,
    pub name: String,
    pub params: Vec<Param>,
    pub duration_ms: u64,
    pub layers: Vec<Primitive>,
}

/// Colour values for a program's params.
pub type Bindings = BTreeMap<String, Rgb>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown param {0}")]
pub struct UnknownParam(pub String);

impl PatternProgram {
    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Every param at its default colour.
    pub fn default_bindings(&self) -> Bindings {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.default))
            .collect()
    }
}

/// Merges colour edits over the program's defaults; later edits win.
pub fn bind_colors<'a, I>(program: &PatternProgram, edits: I) -> Result<Bindings, UnknownParam>
where
    I: IntoIterator<Item = (&'a str, Rgb)>,
{
    let mut bindings = program.default_bindings();
    for (name, rgb) in edits {
        match bindings.get_mut(name) {
            Some(slot) => *slot = rgb,
            None => return Err(UnknownParam(name.to_owned())),
        }
    }
    Ok(bindings)
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{err}")]
    Parse { path: String, err: ParseError },
    #[error("duplicate pattern id {0}")]
    Duplicate(String),
}

/// Patterns keyed by id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PatternLibrary {
    programs: BTreeMap<String, PatternProgram>,
}

impl PatternLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, program: PatternProgram) -> Result<(), LibraryError> {
        if self.programs.contains_key(&program.id) {
            return Err(LibraryError::Duplicate(program.id));
        }
        self.programs.insert(program.id.clone(), program);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&PatternProgram> {
        self.programs.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.programs.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PatternProgram> {
        self.programs.values()
    }

    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    /// Loads every `*.pattern` file in `dir` (non-recursive, sorted by name).
    /// The pattern's id is its declared name.
    pub fn load_dir(dir: &Path) -> Result<Self, LibraryError> {
        let io = |source| LibraryError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "pattern"))
            .collect();
        paths.sort();
        let mut lib = Self::new();
        for path in paths {
            let source = std::fs::read_to_string(&path).map_err(|source| LibraryError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let program = parse(&source).map_err(|err| LibraryError::Parse {
                path: path.display().to_string(),
                err,
            })?;
            lib.insert(program)?;
        }
        Ok(lib)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_is_a_bijection() {
        let mut seen = [false; PIXELS];
        for strip in [Strip::Left, Strip::Front, Strip::Right] {
            for off in 0..STRIP_LEN {
                let i = DisplayGeometry::index(strip, off).unwrap();
                assert!(!seen[i]);
                seen[i] = true;
                assert_eq!(DisplayGeometry::locate(i), Some((strip, off)));
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(DisplayGeometry::locate(21), None);
        assert_eq!(DisplayGeometry::index(Strip::Front, 7), None);
    }

    #[test]
    fn colour_parsing() {
        assert_eq!("#FF8000".parse::<Rgb>().unwrap(), Rgb::new(255, 128, 0));
        assert_eq!("00ff00".parse::<Rgb>().unwrap(), Rgb::new(0, 255, 0));
        assert!("#FF800".parse::<Rgb>().is_err());
        assert!("#GG0000".parse::<Rgb>().is_err());
        assert_eq!(Rgb::new(1, 2, 255).to_string(), "#0102FF");
    }

    #[test]
    fn frame_text_and_bytes() {
        let mut px = [Rgb::BLACK; PIXELS];
        px[3] = Rgb::new(0x12, 0x34, 0x56);
        let f = Frame::from_pixels(px);
        assert_eq!(f.to_hex_line().parse::<Frame>().unwrap(), f);
        assert_eq!(Frame::from_bytes(&f.to_bytes()), f);
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json.len(), 126 + 2);
        assert_eq!(serde_json::from_str::<Frame>(&json).unwrap(), f);
        assert!("FF0000".parse::<Frame>().is_err());
    }

    #[test]
    fn bind_colors_merges_over_defaults() {
        let p = parse(
            "pattern \"two\" { param color c1 = #FF0000 param color c2 = #0000FF duration 100ms layer solid(c1) layer segment([0..3], c2) }",
        )
        .unwrap();
        let b = bind_colors(&p, [("c1", Rgb::new(255, 255, 0))]).unwrap();
        assert_eq!(b["c1"], Rgb::new(255, 255, 0));
        assert_eq!(b["c2"], Rgb::new(0, 0, 255));
        let b = bind_colors(&p, [("c1", Rgb::new(1, 1, 1)), ("c1", Rgb::new(2, 2, 2))]).unwrap();
        assert_eq!(b["c1"], Rgb::new(2, 2, 2));
        assert_eq!(bind_colors(&p, [("c9", Rgb::BLACK)]), Err(UnknownParam("c9".into())));
        // the program itself is untouched
        assert_eq!(p.params[0].default, Rgb::new(255, 0, 0));
    }
}
