use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::{parse_quantity, Value};

/// A 1-based source position. Ignored by equality so that round-trips compare structure only.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl Eq for Span {}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Num(Value),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Colon,
    Semi,
    Comma,
    Dot,
    Arrow,
    Op(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Op(o) => write!(f, "`{o}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<(Tok, Span)>, LexError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let err = |message: String| LexError { span, message };
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ':' => Some(Tok::Colon),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            _ => None,
        };
        if let Some(t) = single {
            bump!();
            out.push((t, span));
            continue;
        }
        let next = chars.get(i + 1).copied();
        match (c, next) {
            ('-', Some('>')) => {
                bump!();
                bump!();
                out.push((Tok::Arrow, span));
                continue;
            }
            ('<' | '>', Some('=')) => {
                bump!();
                bump!();
                out.push((Tok::Op(if c == '<' { "<=" } else { ">=" }), span));
                continue;
            }
            ('=', Some('=')) => {
                bump!();
                bump!();
                out.push((Tok::Op("="), span));
                continue;
            }
            ('<', _) | ('>', _) | ('=', _) => {
                bump!();
                out.push((
                    Tok::Op(match c {
                        '<' => "<",
                        '>' => ">",
                        _ => "=",
                    }),
                    span,
                ));
                continue;
            }
            _ => {}
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(err("unterminated string".into()));
                };
                match ch {
                    '"' => {
                        bump!();
                        break;
                    }
                    '\\' => {
                        bump!();
                        let Some(&esc) = chars.get(i) else {
                            return Err(err("unterminated string".into()));
                        };
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            '\\' => '\\',
                            '"' => '"',
                            other => return Err(err(format!("unknown escape `\\{other}`"))),
                        });
                        bump!();
                    }
                    _ => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            out.push((Tok::Str(s), span));
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && next.is_some_and(|n| n.is_ascii_digit())) {
            let start = i;
            bump!();
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                // A dot not followed by a digit is punctuation.
                if chars[i] == '.' && !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    break;
                }
                bump!();
            }
            let mut exponent = false;
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if chars.get(j).is_some_and(|s| *s == '+' || *s == '-') {
                    j += 1;
                }
                if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                    exponent = true;
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
            }
            let num_end = i;
            while !exponent && i < chars.len() && chars[i].is_ascii_alphabetic() {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            let value = if exponent {
                text.parse::<f64>().ok().map(Value::Decimal)
            } else {
                parse_quantity(&text)
            };
            let value = value.ok_or_else(|| {
                let suffix: String = chars[num_end..i].iter().collect();
                err(if suffix.is_empty() {
                    format!("invalid number `{text}`")
                } else {
                    format!("unknown unit `{suffix}` in `{text}`")
                })
            })?;
            out.push((Tok::Num(value), span));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), span));
            continue;
        }
        return Err(err(format!("unexpected character `{c}`")));
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}
