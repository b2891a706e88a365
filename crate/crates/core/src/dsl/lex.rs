//! Tokenizer for structure documents, with line/column spans.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokKind {
    Ident(String),
    Int(i64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Arrow,
    Slash,
    Eof,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Ident(s) => write!(f, "`{s}`"),
            TokKind::Int(v) => write!(f, "`{v}`"),
            TokKind::LBrace => write!(f, "`{{`"),
            TokKind::RBrace => write!(f, "`}}`"),
            TokKind::LParen => write!(f, "`(`"),
            TokKind::RParen => write!(f, "`)`"),
            TokKind::Comma => write!(f, "`,`"),
            TokKind::Semi => write!(f, "`;`"),
            TokKind::Arrow => write!(f, "`->`"),
            TokKind::Slash => write!(f, "`/`"),
            TokKind::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tok {
    pub kind: TokKind,
    pub span: Span,
}

/// Parse failure with a source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn at(span: Span, message: impl Into<String>) -> ParseError {
        ParseError {
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.col, self.message
        )
    }
}

impl std::error::Error for ParseError {}

pub fn lex(text: &str) -> Result<Vec<Tok>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    loop {
        let span = Span { line, col };
        let Some(&c) = chars.peek() else {
            out.push(Tok {
                kind: TokKind::Eof,
                span,
            });
            return Ok(out);
        };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '{' => {
                chars.next();
                col += 1;
                out.push(Tok {
                    kind: TokKind::LBrace,
                    span,
                });
            }
            '}' => {
                chars.next();
                col += 1;
                out.push(Tok {
                    kind: TokKind::RBrace,
                    span,
                });
            }
            '(' => {
                chars.next();
                col += 1;
                out.push(Tok {
                    kind: TokKind::LParen,
                    span,
                });
            }
            ')' => {
                chars.next();
                col += 1;
                out.push(Tok {
                    kind: TokKind::RParen,
                    span,
                });
            }
            ',' => {
                chars.next();
                col += 1;
                out.push(Tok {
                    kind: TokKind::Comma,
                    span,
                });
            }
            ';' => {
                chars.next();
                col += 1;
                out.push(Tok {
                    kind: TokKind::Semi,
                    span,
                });
            }
            '/' => {
                chars.next();
                col += 1;
                out.push(Tok {
                    kind: TokKind::Slash,
                    span,
                });
            }
            '-' => {
                chars.next();
                col += 1;
                match chars.peek() {
                    Some('>') => {
                        chars.next();
                        col += 1;
                        out.push(Tok {
                            kind: TokKind::Arrow,
                            span,
                        });
                    }
                    Some(d) if d.is_ascii_digit() => {
                        let (value, consumed) = read_int(&mut chars)?;
                        col += consumed;
                        reject_decimal_point(&mut chars, Span { line, col })?;
                        out.push(Tok {
                            kind: TokKind::Int(-value),
                            span,
                        });
                    }
                    _ => {
                        return Err(ParseError::at(span, "expected `->` or a number after `-`"));
                    }
                }
            }
            d if d.is_ascii_digit() => {
                let (value, consumed) = read_int(&mut chars)?;
                col += consumed;
                reject_decimal_point(&mut chars, Span { line, col })?;
                out.push(Tok {
                    kind: TokKind::Int(value),
                    span,
                });
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        name.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(Tok {
                    kind: TokKind::Ident(name),
                    span,
                });
            }
            other => {
                return Err(ParseError::at(
                    span,
                    format!("unexpected character `{other}`"),
                ));
            }
        }
    }
}

fn read_int(
    chars: &mut std::iter::Peekable<std::str::Chars<'_>>,
) -> Result<(i64, usize), ParseError> {
    let mut digits = String::new();
    while let Some(&c) = chars.peek() {
        if c.is_ascii_digit() {
            digits.push(c);
            chars.next();
        } else {
            break;
        }
    }
    let consumed = digits.len();
    match digits.parse::<i64>() {
        Ok(v) => Ok((v, consumed)),
        Err(_) => Err(ParseError {
            line: 0,
            col: 0,
            message: format!("integer literal `{digits}` is out of range"),
        }),
    }
}

fn reject_decimal_point(
    chars: &mut std::iter::Peekable<std::str::Chars<'_>>,
    span: Span,
) -> Result<(), ParseError> {
    if chars.peek() == Some(&'.') {
        return Err(ParseError::at(
            span,
            "decimal notation is not allowed in structure files; write an exact p/q",
        ));
    }
    Ok(())
}
