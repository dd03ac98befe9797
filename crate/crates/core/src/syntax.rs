//! Tokenizer and cursor shared by the formula, postulate and FO/MSO parsers.

use std::fmt;

use thiserror::Error;

/// A syntax error with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {pos}: {message}")]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(pos: usize, message: impl Into<String>) -> Self {
        ParseError {
            pos,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Dot,
    Comma,
    Bang,
    Amp,
    Pipe,
    Arrow,
    DoubleArrow,
    Eq,
    Le,
    Lt,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "`{name}`"),
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrack => "`[`",
            Tok::RBrack => "`]`",
            Tok::Dot => "`.`",
            Tok::Comma => "`,`",
            Tok::Bang => "`!`",
            Tok::Amp => "`&`",
            Tok::Pipe => "`|`",
            Tok::Arrow => "`->`",
            Tok::DoubleArrow => "`<->`",
            Tok::Eq => "`=`",
            Tok::Le => "`<=`",
            Tok::Lt => "`<`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        let rest = &text[i..];
        let (tok, len) = if rest.starts_with("<->") {
            (Tok::DoubleArrow, 3)
        } else if rest.starts_with("->") {
            (Tok::Arrow, 2)
        } else if rest.starts_with("<=") {
            (Tok::Le, 2)
        } else {
            let tok = match c {
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'[' => Tok::LBrack,
                b']' => Tok::RBrack,
                b'.' => Tok::Dot,
                b',' => Tok::Comma,
                b'!' => Tok::Bang,
                b'&' => Tok::Amp,
                b'|' => Tok::Pipe,
                b'=' => Tok::Eq,
                b'<' => Tok::Lt,
                _ => {
                    let ch = rest.chars().next().unwrap_or('?');
                    return Err(ParseError::new(i, format!("unexpected character `{ch}`")));
                }
            };
            (tok, 1)
        };
        out.push((tok, i));
        i += len;
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

pub(crate) struct Cursor {
    toks: Vec<(Tok, usize)>,
    idx: usize,
}

impl Cursor {
    pub(crate) fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Cursor {
            toks: tokenize(text)?,
            idx: 0,
        })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.idx].0
    }

    pub(crate) fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.idx + ahead).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    pub(crate) fn pos(&self) -> usize {
        self.toks[self.idx].1
    }

    pub(crate) fn bump(&mut self) -> Tok {
        let tok = self.toks[self.idx].0.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        tok
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, tok: &Tok) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("{tok}")))
        }
    }

    pub(crate) fn expect_ident(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok((name, pos))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    pub(crate) fn expect_end(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    pub(crate) fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::new(self.pos(), format!("expected {wanted}, found {}", self.peek()))
    }
}

/// Parses `prefix<digits>` into the numeric suffix, e.g. `x12` -> 12.
pub(crate) fn indexed_name(name: &str, prefix: &str) -> Option<usize> {
    let digits = name.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse().ok()
}

pub(crate) const KEYWORDS: &[&str] = &["forall", "exists", "forallsets", "true", "false"];

/// Lowercase identifiers that are not keywords are element variables.
pub(crate) fn is_element_variable(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_ascii_lowercase()) && !KEYWORDS.contains(&name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_operator_wins() {
        let toks: Vec<Tok> = tokenize("a<->b->c<=d<e").unwrap().into_iter().map(|(t, _)| t).collect();
        assert_eq!(
            toks,
            vec![
                Tok::Ident("a".into()),
                Tok::DoubleArrow,
                Tok::Ident("b".into()),
                Tok::Arrow,
                Tok::Ident("c".into()),
                Tok::Le,
                Tok::Ident("d".into()),
                Tok::Lt,
                Tok::Ident("e".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn bad_character_reports_offset() {
        let err = tokenize("x1 # x2").unwrap_err();
        assert_eq!(err.pos, 3);
    }

    #[test]
    fn indexed_names() {
        assert_eq!(indexed_name("x12", "x"), Some(12));
        assert_eq!(indexed_name("x", "x"), None);
        assert_eq!(indexed_name("x01", "x"), None);
        assert_eq!(indexed_name("A3", "A"), Some(3));
    }
}
