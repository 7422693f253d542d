use super::parser::{ParseError, ParseErrorKind};
use super::Rgb;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    /// Numeric literal; `int` is set when the literal has no fraction.
    Num { value: f64, int: Option<u64> },
    Color(Rgb),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eq,
    DotDot,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num { value, .. } => format!("number {value}"),
            Tok::Color(c) => format!("colour {c}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn take_while(&mut self, mut pred: impl FnMut(char) -> bool) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            out.push(c);
            self.bump();
        }
        out
    }
}

fn err(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        kind: ParseErrorKind::Syntax(msg.into()),
    }
}

pub(crate) fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        cur.take_while(char::is_whitespace);
        let (line, column) = (cur.line, cur.column);
        let Some(c) = cur.peek() else {
            out.push(Token {
                tok: Tok::Eof,
                line,
                column,
            });
            return Ok(out);
        };
        let tok = match c {
            '/' => {
                cur.bump();
                if cur.peek() != Some('/') {
                    return Err(err(line, column, "unexpected `/`"));
                }
                cur.take_while(|c| c != '\n');
                continue;
            }
            '{' | '}' | '(' | ')' | '[' | ']' | ',' | '=' => {
                cur.bump();
                match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    _ => Tok::Eq,
                }
            }
            '.' => {
                cur.bump();
                if cur.bump() != Some('.') {
                    return Err(err(line, column, "expected `..`"));
                }
                Tok::DotDot
            }
            '#' => {
                cur.bump();
                let digits = cur.take_while(|c| c.is_ascii_alphanumeric());
                match digits.parse::<Rgb>() {
                    Ok(rgb) if digits.len() == 6 => Tok::Color(rgb),
                    _ => {
                        return Err(err(
                            line,
                            column,
                            format!("invalid colour literal #{digits}: expected #RRGGBB"),
                        ))
                    }
                }
            }
            '"' => {
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        None | Some('\n') => return Err(err(line, column, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match cur.bump() {
                            Some(e @ ('"' | '\\')) => s.push(e),
                            _ => return Err(err(line, column, "invalid escape in string")),
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() => {
                let mut text = cur.take_while(|c| c.is_ascii_digit());
                let mut fractional = false;
                // a lone `.` followed by a digit is a fraction; `..` is a range
                if cur.peek() == Some('.') {
                    let mut ahead = cur.chars.clone();
                    ahead.next();
                    if ahead.peek().is_some_and(|c| c.is_ascii_digit()) {
                        cur.bump();
                        text.push('.');
                        text.push_str(&cur.take_while(|c| c.is_ascii_digit()));
                        fractional = true;
                    }
                }
                let value: f64 = text
                    .parse()
                    .map_err(|_| err(line, column, format!("invalid number {text}")))?;
                let int = if fractional { None } else { text.parse().ok() };
                Tok::Num { value, int }
            }
            c if c.is_alphabetic() || c == '_' => {
                Tok::Ident(cur.take_while(|c| c.is_alphanumeric() || c == '_'))
            }
            other => return Err(err(line, column, format!("unexpected character {other:?}"))),
        };
        out.push(Token { tok, line, column });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_units_and_ranges() {
        assert_eq!(
            toks("1000ms 0.5 [3..7]"),
            vec![
                Tok::Num { value: 1000.0, int: Some(1000) },
                Tok::Ident("ms".into()),
                Tok::Num { value: 0.5, int: None },
                Tok::LBracket,
                Tok::Num { value: 3.0, int: Some(3) },
                Tok::DotDot,
                Tok::Num { value: 7.0, int: Some(7) },
                Tok::RBracket,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("pattern\n  \"x\" // note\n {").unwrap();
        assert_eq!((t[1].line, t[1].column), (2, 3));
        assert_eq!((t[2].line, t[2].column), (3, 2));
    }

    #[test]
    fn bad_literals() {
        assert!(tokenize("#FF00").is_err());
        assert!(tokenize("\"open").is_err());
        assert!(tokenize("a $ b").is_err());
        assert_eq!(toks("\"a\\\"b\""), vec![Tok::Str("a\"b".into()), Tok::Eof]);
    }
}
