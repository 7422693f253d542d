//! Recursive-descent parser.
//!
//! ```text
//! program   := "pattern" string "{" param* "duration" int "ms" layer+ "}"
//! param     := "param" "color" ident "=" hexcolor
//! layer     := "layer" primitive
//! primitive := "solid" "(" color ")"
//!            | "blink" "(" color "," period "," number ")"
//!            | "pulse" "(" color "," period "," number "," number ")"
//!            | "sweep" "(" color "," ("left" | "right") "," int "," period ")"
//!            | "segment" "(" "[" int ".." int "]" "," color ")"
//!            | "off" [ "(" ")" ]
//! period    := int [ "ms" ]
//! color     := hexcolor | ident
//! ```

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::lexer::{tokenize, Tok, Token};
use super::{ColorRef, Param, PatternProgram, Primitive, SweepFrom, PIXELS};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown primitive {0}")]
    UnknownPrimitive(String),
    #[error("duplicate param {0}")]
    DuplicateParam(String),
    #[error("pixel out of range: {0} (valid 0..{max})", max = PIXELS - 1)]
    PixelOutOfRange(u64),
    #[error("missing duration")]
    MissingDuration,
    #[error("unknown colour {0}")]
    UnknownColor(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

/// Parse failure with a 1-based source position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.kind)
    }
}

impl std::error::Error for ParseError {}

/// Parses a `.pattern` source. The declared name doubles as the id.
pub fn parse(source: &str) -> Result<PatternProgram, ParseError> {
    let tokens = tokenize(source)?;
    Parser {
        tokens,
        pos: 0,
        params: BTreeSet::new(),
    }
    .program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    params: BTreeSet<String>,
}

type PResult<T> = std::result::Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_at(t: &Token, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: t.line,
            column: t.column,
            kind,
        }
    }

    fn unexpected(t: &Token, wanted: &str) -> ParseError {
        Self::error_at(
            t,
            ParseErrorKind::Syntax(format!("expected {wanted}, found {}", t.tok.describe())),
        )
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<Token> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(t),
            _ => Err(Self::unexpected(&t, &format!("`{kw}`"))),
        }
    }

    fn punct(&mut self, want: Tok) -> PResult<Token> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(Self::unexpected(&t, &want.describe()))
        }
    }

    fn ident(&mut self) -> PResult<(String, Token)> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t)),
            _ => Err(Self::unexpected(&t, "identifier")),
        }
    }

    fn int(&mut self) -> PResult<(u64, Token)> {
        let t = self.next();
        match t.tok {
            Tok::Num { int: Some(v), .. } => Ok((v, t)),
            _ => Err(Self::unexpected(&t, "integer")),
        }
    }

    fn number(&mut self) -> PResult<(f64, Token)> {
        let t = self.next();
        match t.tok {
            Tok::Num { value, .. } => Ok((value, t)),
            _ => Err(Self::unexpected(&t, "number")),
        }
    }

    fn program(mut self) -> PResult<PatternProgram> {
        self.keyword("pattern")?;
        let t = self.next();
        let name = match &t.tok {
            Tok::Str(s) if !s.is_empty() => s.clone(),
            Tok::Str(_) => {
                return Err(Self::error_at(
                    &t,
                    ParseErrorKind::InvalidValue("pattern name must not be empty".into()),
                ))
            }
            _ => return Err(Self::unexpected(&t, "pattern name string")),
        };
        self.punct(Tok::LBrace)?;

        let mut params = Vec::new();
        while self.is_keyword("param") {
            params.push(self.param()?);
        }

        if !self.is_keyword("duration") {
            let t = self.peek().clone();
            return Err(if self.is_keyword("layer") || t.tok == Tok::RBrace || t.tok == Tok::Eof {
                Self::error_at(&t, ParseErrorKind::MissingDuration)
            } else {
                Self::unexpected(&t, "`param` or `duration`")
            });
        }
        self.next();
        let (duration_ms, t) = self.int()?;
        if duration_ms == 0 {
            return Err(Self::error_at(
                &t,
                ParseErrorKind::InvalidValue("duration must be at least 1ms".into()),
            ));
        }
        self.keyword("ms")?;

        let mut layers = Vec::new();
        while self.is_keyword("layer") {
            self.next();
            layers.push(self.primitive()?);
        }
        if layers.is_empty() {
            return Err(Self::unexpected(self.peek(), "`layer`"));
        }
        self.punct(Tok::RBrace)?;
        let t = self.next();
        if t.tok != Tok::Eof {
            return Err(Self::unexpected(&t, "end of input"));
        }
        Ok(PatternProgram {
            id: name.clone(),
            name,
            params,
            duration_ms,
            layers,
        })
    }

    fn param(&mut self) -> PResult<Param> {
        self.keyword("param")?;
        self.keyword("color")?;
        let (name, t) = self.ident()?;
        if !self.params.insert(name.clone()) {
            return Err(Self::error_at(&t, ParseErrorKind::DuplicateParam(name)));
        }
        self.punct(Tok::Eq)?;
        let t = self.next();
        match t.tok {
            Tok::Color(default) => Ok(Param { name, default }),
            _ => Err(Self::unexpected(&t, "colour literal #RRGGBB")),
        }
    }

    fn color(&mut self) -> PResult<ColorRef> {
        let t = self.next();
        match &t.tok {
            Tok::Color(c) => Ok(ColorRef::Literal(*c)),
            Tok::Ident(name) if self.params.contains(name) => Ok(ColorRef::Param(name.clone())),
            Tok::Ident(name) => Err(Self::error_at(&t, ParseErrorKind::UnknownColor(name.clone()))),
            _ => Err(Self::unexpected(&t, "colour or param name")),
        }
    }

    fn period(&mut self) -> PResult<u64> {
        let (v, t) = self.int()?;
        if self.is_keyword("ms") {
            self.next();
        }
        if v == 0 {
            return Err(Self::error_at(
                &t,
                ParseErrorKind::InvalidValue("period must be at least 1ms".into()),
            ));
        }
        Ok(v)
    }

    fn unit_interval(&mut self, what: &str, allow_zero: bool) -> PResult<f64> {
        let (v, t) = self.number()?;
        let ok = if allow_zero { v >= 0.0 } else { v > 0.0 } && v <= 1.0;
        if !ok {
            let range = if allow_zero { "[0, 1]" } else { "(0, 1]" };
            return Err(Self::error_at(
                &t,
                ParseErrorKind::InvalidValue(format!("{what} {v} outside {range}")),
            ));
        }
        Ok(v)
    }

    fn pixel(&mut self) -> PResult<u8> {
        let (v, t) = self.int()?;
        if v >= PIXELS as u64 {
            return Err(Self::error_at(&t, ParseErrorKind::PixelOutOfRange(v)));
        }
        Ok(v as u8)
    }

    fn primitive(&mut self) -> PResult<Primitive> {
        let (name, t) = self.ident()?;
        if name == "off" {
            if self.peek().tok == Tok::LParen {
                self.next();
                self.punct(Tok::RParen)?;
            }
            return Ok(Primitive::Off);
        }
        if !matches!(name.as_str(), "solid" | "blink" | "pulse" | "sweep" | "segment") {
            return Err(Self::error_at(&t, ParseErrorKind::UnknownPrimitive(name)));
        }
        self.punct(Tok::LParen)?;
        let prim = match name.as_str() {
            "solid" => Primitive::Solid {
                color: self.color()?,
            },
            "blink" => {
                let color = self.color()?;
                self.punct(Tok::Comma)?;
                let period_ms = self.period()?;
                self.punct(Tok::Comma)?;
                let duty = self.unit_interval("duty", false)?;
                Primitive::Blink {
                    color,
                    period_ms,
                    duty,
                }
            }
            "pulse" => {
                let color = self.color()?;
                self.punct(Tok::Comma)?;
                let period_ms = self.period()?;
                self.punct(Tok::Comma)?;
                let min_tok = self.peek().clone();
                let min = self.unit_interval("min", true)?;
                self.punct(Tok::Comma)?;
                let max = self.unit_interval("max", true)?;
                if min > max {
                    return Err(Self::error_at(
                        &min_tok,
                        ParseErrorKind::InvalidValue(format!("min {min} exceeds max {max}")),
                    ));
                }
                Primitive::Pulse {
                    color,
                    period_ms,
                    min,
                    max,
                }
            }
            "sweep" => {
                let color = self.color()?;
                self.punct(Tok::Comma)?;
                let (dir, t) = self.ident()?;
                let from = match dir.as_str() {
                    "left" => SweepFrom::Left,
                    "right" => SweepFrom::Right,
                    _ => return Err(Self::unexpected(&t, "`left` or `right`")),
                };
                self.punct(Tok::Comma)?;
                let (width, t) = self.int()?;
                if width == 0 || width > PIXELS as u64 {
                    return Err(Self::error_at(
                        &t,
                        ParseErrorKind::InvalidValue(format!("sweep width {width} outside 1..{PIXELS}")),
                    ));
                }
                self.punct(Tok::Comma)?;
                let period_ms = self.period()?;
                Primitive::Sweep {
                    color,
                    from,
                    width_px: width as u32,
                    period_ms,
                }
            }
            _ => {
                self.punct(Tok::LBracket)?;
                let lo_tok = self.peek().clone();
                let lo = self.pixel()?;
                self.punct(Tok::DotDot)?;
                let hi = self.pixel()?;
                self.punct(Tok::RBracket)?;
                if lo > hi {
                    return Err(Self::error_at(
                        &lo_tok,
                        ParseErrorKind::InvalidValue(format!("empty range [{lo}..{hi}]")),
                    ));
                }
                self.punct(Tok::Comma)?;
                let color = self.color()?;
                Primitive::Segment { lo, hi, color }
            }
        };
        self.punct(Tok::RParen)?;
        Ok(prim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::Rgb;

    fn kind(src: &str) -> ParseErrorKind {
        parse(src).unwrap_err().kind
    }

    #[test]
    fn minimal_program() {
        let p = parse(r#"pattern "solid" { param color c = #FF0000 duration 1000ms layer solid(c) }"#).unwrap();
        assert_eq!(p.id, "solid");
        assert_eq!(p.params.len(), 1);
        assert_eq!(p.params[0].default, Rgb::new(255, 0, 0));
        assert_eq!(p.duration_ms, 1000);
        assert_eq!(p.layers, vec![Primitive::Solid { color: ColorRef::Param("c".into()) }]);
    }

    #[test]
    fn all_primitives() {
        let p = parse(
            r#"
            // boilerplate
            pattern "all" {
              param color a = #010203
              duration 4000ms
              layer solid(#000010)
              layer blink(a, 500ms, 0.25)
              layer pulse(#FFFFFF, 1000, 0.1, 0.9)
              layer sweep(a, right, 3, 2100ms)
              layer segment([7..13], a)
              layer off
              layer off()
            }"#,
        )
        .unwrap();
        assert_eq!(p.layers.len(), 7);
        assert_eq!(
            p.layers[3],
            Primitive::Sweep {
                color: ColorRef::Param("a".into()),
                from: SweepFrom::Right,
                width_px: 3,
                period_ms: 2100
            }
        );
    }

    #[test]
    fn missing_duration() {
        let err = parse(r#"pattern "x" { param color c = #FF0000 layer solid(c) }"#).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::MissingDuration);
        assert_eq!(err.to_string(), "1:39: missing duration");
    }

    #[test]
    fn pixel_out_of_range() {
        let src = "pattern \"x\" {\n  param color c = #FF0000\n  duration 10ms\n  layer segment([19..25], c)\n}";
        let err = parse(src).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::PixelOutOfRange(25));
        assert_eq!((err.line, err.column), (4, 22));
        assert!(err.to_string().contains("pixel out of range"));
    }

    #[test]
    fn duplicate_param_reports_line() {
        let src = "pattern \"x\" {\n  param color c = #FF0000\n  param color c = #00FF00\n  duration 10ms\n  layer solid(c)\n}";
        let err = parse(src).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DuplicateParam("c".into()));
        assert_eq!(err.line, 3);
    }

    #[test]
    fn semantic_errors() {
        assert_eq!(
            kind(r#"pattern "x" { duration 10ms layer glow(#FF0000) }"#),
            ParseErrorKind::UnknownPrimitive("glow".into())
        );
        assert_eq!(
            kind(r#"pattern "x" { duration 10ms layer solid(nope) }"#),
            ParseErrorKind::UnknownColor("nope".into())
        );
        assert!(matches!(
            kind(r#"pattern "x" { duration 10ms layer blink(#FF0000, 100, 0) }"#),
            ParseErrorKind::InvalidValue(_)
        ));
        assert!(matches!(
            kind(r#"pattern "x" { duration 10ms layer pulse(#FF0000, 100, 0.8, 0.2) }"#),
            ParseErrorKind::InvalidValue(_)
        ));
        assert!(matches!(
            kind(r#"pattern "x" { duration 0ms layer off }"#),
            ParseErrorKind::InvalidValue(_)
        ));
        assert!(matches!(
            kind(r#"pattern "x" { duration 10ms layer sweep(#FF0000, up, 3, 100) }"#),
            ParseErrorKind::Syntax(_)
        ));
        assert!(matches!(
            kind(r#"pattern "x" { duration 10ms }"#),
            ParseErrorKind::Syntax(_)
        ));
        assert!(matches!(
            kind(r#"pattern "x" { duration 10ms layer off } trailing"#),
            ParseErrorKind::Syntax(_)
        ));
    }
}
