//! Tokenizer shared by the model and rule languages. `#` starts a comment
//! running to the end of the line.

use std::collections::VecDeque;
use std::fmt;

/// A token kind. Keywords are plain identifiers; parsers decide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// A decimal literal too large for `i64` unless negated.
    IntMin,
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Colon,
    Comma,
    Dot,
    Arrow,
    Link,
    Tilde,
    At,
    Pipe,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    AndAnd,
    OrOr,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Int(i) => return write!(f, "`{i}`"),
            Tok::IntMin => "`9223372036854775808`",
            Tok::Str(s) => return write!(f, "string {s:?}"),
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Semi => "`;`",
            Tok::Colon => "`:`",
            Tok::Comma => "`,`",
            Tok::Dot => "`.`",
            Tok::Arrow => "`->`",
            Tok::Link => "`--`",
            Tok::Tilde => "`~`",
            Tok::At => "`@`",
            Tok::Pipe => "`|`",
            Tok::Assign => "`=`",
            Tok::Eq => "`==`",
            Tok::Ne => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Slash => "`/`",
            Tok::Percent => "`%`",
            Tok::Bang => "`!`",
            Tok::AndAnd => "`&&`",
            Tok::OrOr => "`||`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

/// A token with its 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

/// A lexical or syntactic error with position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

/// Splits `src` into tokens, ending with `Tok::Eof`.
pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut lexer = Lexer::new(src);
    let mut out = Vec::new();
    loop {
        let t = lexer.next_token()?;
        let end = t.tok == Tok::Eof;
        out.push(t);
        if end {
            return Ok(out);
        }
    }
}

/// Produces tokens one at a time; `Tok::Eof` repeats at the end.
pub struct Lexer<'a> {
    src: &'a str,
    i: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer {
            src,
            i: 0,
            line: 1,
            col: 1,
        }
    }

    pub fn next_token(&mut self) -> Result<Token, SyntaxError> {
        let src = self.src;
        let bytes = src.as_bytes();
        let (mut i, mut line, mut col) = (self.i, self.line, self.col);
        while i < bytes.len() {
            let c = bytes[i];
            let (tl, tc) = (line, col);
            let err = |message: String| SyntaxError {
                line: tl,
                col: tc,
                message,
            };
            match c {
                b'\n' => {
                    i += 1;
                    line += 1;
                    col = 1;
                    continue;
                }
                b' ' | b'\t' | b'\r' => {
                    i += 1;
                    col += 1;
                    continue;
                }
                b'#' => {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                    continue;
                }
                _ => {}
            }
            let two = if i + 1 < bytes.len() { Some(bytes[i + 1]) } else { None };
            let (tok, len) = match (c, two) {
                (b'-', Some(b'>')) => (Tok::Arrow, 2),
                (b'-', Some(b'-')) => (Tok::Link, 2),
                (b'=', Some(b'=')) => (Tok::Eq, 2),
                (b'!', Some(b'=')) => (Tok::Ne, 2),
                (b'<', Some(b'=')) => (Tok::Le, 2),
                (b'>', Some(b'=')) => (Tok::Ge, 2),
                (b'&', Some(b'&')) => (Tok::AndAnd, 2),
                (b'|', Some(b'|')) => (Tok::OrOr, 2),
                (b'{', _) => (Tok::LBrace, 1),
                (b'}', _) => (Tok::RBrace, 1),
                (b'(', _) => (Tok::LParen, 1),
                (b')', _) => (Tok::RParen, 1),
                (b'[', _) => (Tok::LBracket, 1),
                (b']', _) => (Tok::RBracket, 1),
                (b';', _) => (Tok::Semi, 1),
                (b':', _) => (Tok::Colon, 1),
                (b',', _) => (Tok::Comma, 1),
                (b'.', _) => (Tok::Dot, 1),
                (b'~', _) => (Tok::Tilde, 1),
                (b'@', _) => (Tok::At, 1),
                (b'|', _) => (Tok::Pipe, 1),
                (b'=', _) => (Tok::Assign, 1),
                (b'<', _) => (Tok::Lt, 1),
                (b'>', _) => (Tok::Gt, 1),
                (b'+', _) => (Tok::Plus, 1),
                (b'-', _) => (Tok::Minus, 1),
                (b'*', _) => (Tok::Star, 1),
                (b'/', _) => (Tok::Slash, 1),
                (b'%', _) => (Tok::Percent, 1),
                (b'!', _) => (Tok::Bang, 1),
                (b'"', _) => {
                    let mut s = String::new();
                    let mut j = i + 1;
                    loop {
                        match bytes.get(j) {
                            None | Some(b'\n') => return Err(err("unterminated string".into())),
                            Some(b'"') => break,
                            Some(b'\\') => {
                                match bytes.get(j + 1) {
                                    Some(b'n') => s.push('\n'),
                                    Some(b't') => s.push('\t'),
                                    Some(b'"') => s.push('"'),
                                    Some(b'\\') => s.push('\\'),
                                    _ => return Err(err("invalid escape in string".into())),
                                }
                                j += 2;
                            }
                            Some(_) => {
                                let ch = src[j..].chars().next().expect("in bounds");
                                s.push(ch);
                                j += ch.len_utf8();
                            }
                        }
                    }
                    let len = j + 1 - i;
                    (Tok::Str(s), len)
                }
                (b'0'..=b'9', _) => {
                    let mut j = i;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    let text = &src[i..j];
                    let tok = match text.parse::<i64>() {
                        Ok(v) => Tok::Int(v),
                        Err(_) if text == "9223372036854775808" => Tok::IntMin,
                        Err(_) => return Err(err(format!("integer literal `{text}` out of range"))),
                    };
                    (tok, j - i)
                }
                (c, _) if c == b'_' || c.is_ascii_alphabetic() => {
                    let mut j = i;
                    while j < bytes.len() && (bytes[j] == b'_' || bytes[j].is_ascii_alphanumeric()) {
                        j += 1;
                    }
                    (Tok::Ident(src[i..j].to_string()), j - i)
                }
                _ => {
                    let ch = src[i..].chars().next().expect("in bounds");
                    return Err(err(format!("unexpected character {ch:?}")));
                }
            };
            // only string literals may hold multi-byte characters
            col += match &tok {
                Tok::Str(_) => src[i..i + len].chars().count() as u32,
                _ => len as u32,
            };
            i += len;
            (self.i, self.line, self.col) = (i, line, col);
            return Ok(Token {
                tok,
                line: tl,
                col: tc,
            });
        }
        (self.i, self.line, self.col) = (i, line, col);
        Ok(Token {
            tok: Tok::Eof,
            line,
            col,
        })
    }
}

/// Cursor over the token stream with one token of lookahead and the
/// helpers every parser needs. A lexical error ends the stream; from then
/// on every error the parser raises is that lexical error.
pub struct Cursor<'a> {
    lexer: Lexer<'a>,
    /// The current token, then the lookahead unless the stream has ended.
    buf: VecDeque<Token>,
    lex_error: Option<SyntaxError>,
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str) -> Result<Self, SyntaxError> {
        let mut c = Cursor {
            lexer: Lexer::new(src),
            buf: VecDeque::with_capacity(2),
            lex_error: None,
        };
        c.fill();
        match c.lex_error.take() {
            Some(e) => Err(e),
            None => Ok(c),
        }
    }

    fn fill(&mut self) {
        while self.buf.len() < 2 && self.buf.back().is_none_or(|t| t.tok != Tok::Eof) {
            let t = match self.lexer.next_token() {
                Ok(t) => t,
                Err(e) => {
                    let t = Token {
                        tok: Tok::Eof,
                        line: e.line,
                        col: e.col,
                    };
                    self.lex_error = Some(e);
                    t
                }
            };
            self.buf.push_back(t);
        }
    }

    pub fn peek(&self) -> &Tok {
        &self.here().tok
    }

    /// The token `n` places ahead; only one token of lookahead is kept.
    pub fn peek_at(&self, n: usize) -> &Tok {
        let i = n.min(self.buf.len() - 1);
        &self.buf[i].tok
    }

    pub fn here(&self) -> &Token {
        &self.buf[0]
    }

    /// Moves past the current token and returns it; `Eof` stays in place.
    pub fn bump(&mut self) -> Tok {
        if self.buf.len() < 2 {
            return Tok::Eof;
        }
        let t = self.buf.pop_front().expect("two tokens buffered").tok;
        self.fill();
        t
    }

    /// End of input. False after a lexical error so parsers run into it.
    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof) && self.lex_error.is_none()
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        if let Some(e) = &self.lex_error {
            return e.clone();
        }
        let t = self.here();
        SyntaxError {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    pub fn unexpected(&self, wanted: &str) -> SyntaxError {
        self.error(format!("expected {wanted}, found {}", self.peek()))
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, t: &Tok) -> Result<(), SyntaxError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.unexpected(&t.to_string()))
        }
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    pub fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Tok::Ident(_) => match self.bump() {
                Tok::Ident(s) => Ok(s),
                _ => unreachable!(),
            },
            _ => Err(self.unexpected("identifier")),
        }
    }

    /// Current line, used by line-oriented rule bodies.
    pub fn line(&self) -> u32 {
        self.here().line
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_comments() {
        let t = tokenize("a -> b -- c # note\n \"x\\\"y\" 42 <= ==").unwrap();
        let kinds: Vec<_> = t.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("a".into()),
                Tok::Arrow,
                Tok::Ident("b".into()),
                Tok::Link,
                Tok::Ident("c".into()),
                Tok::Str("x\"y".into()),
                Tok::Int(42),
                Tok::Le,
                Tok::Eq,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("a\n  b").unwrap();
        assert_eq!((t[1].line, t[1].col), (2, 3));
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(tokenize("\"open").is_err());
        assert!(tokenize("$").is_err());
        assert!(tokenize("99999999999999999999").is_err());
    }

    #[test]
    fn cursor_reports_lexical_errors_after_valid_tokens() {
        let mut c = Cursor::new("a b $").unwrap();
        assert_eq!(c.bump(), Tok::Ident("a".into()));
        assert!(!c.at_eof());
        let e = c.unexpected("anything");
        assert_eq!((e.line, e.col), (1, 5));
        assert!(e.message.contains("unexpected character"), "{e}");
        assert!(Cursor::new("$").is_err());
    }
}
