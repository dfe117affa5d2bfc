use std::fmt;

use crate::measures::Comparator;

/// 1-based line/column of a character in the input. Columns count chars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: u32,
    pub column: u32,
}

impl Pos {
    pub const START: Pos = Pos { line: 1, column: 1 };
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Colon,
    Comma,
    Newline,
    Str(String),
    Number(f64),
    Ident(String),
    Cmp(Comparator),
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LBracket => "`[`".into(),
            TokenKind::RBracket => "`]`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Newline => "end of line".into(),
            TokenKind::Str(_) => "string".into(),
            TokenKind::Number(n) => format!("number `{n}`"),
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Cmp(c) => format!("`{c}`"),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

/// Splits `input` into tokens. Newlines inside `[...]` and `(...)` are not
/// emitted, so lists may span lines. `#` starts a comment outside strings.
pub fn tokenize(input: &str) -> Result<Vec<Token>, LexError> {
    let mut lexer = Lexer {
        chars: input.chars().collect(),
        idx: 0,
        pos: Pos::START,
        depth: 0,
        tokens: Vec::new(),
    };
    lexer.run()?;
    Ok(lexer.tokens)
}

struct Lexer {
    chars: Vec<char>,
    idx: usize,
    pos: Pos,
    depth: usize,
    tokens: Vec<Token>,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).copied()
    }

    fn peek_at(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.idx + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.idx).copied()?;
        self.idx += 1;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.column = 1;
        } else {
            self.pos.column += 1;
        }
        Some(c)
    }

    fn push(&mut self, kind: TokenKind, pos: Pos) {
        self.tokens.push(Token { kind, pos });
    }

    fn error<T>(&self, pos: Pos, message: impl Into<String>) -> Result<T, LexError> {
        Err(LexError {
            pos,
            message: message.into(),
        })
    }

    fn run(&mut self) -> Result<(), LexError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        self.push(TokenKind::Newline, start);
                    }
                }
                c if c.is_whitespace() => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '{' => self.single(TokenKind::LBrace),
                '}' => self.single(TokenKind::RBrace),
                '[' => {
                    self.depth += 1;
                    self.single(TokenKind::LBracket)
                }
                ']' => {
                    self.depth = self.depth.saturating_sub(1);
                    self.single(TokenKind::RBracket)
                }
                '(' => {
                    self.depth += 1;
                    self.single(TokenKind::LParen)
                }
                ')' => {
                    self.depth = self.depth.saturating_sub(1);
                    self.single(TokenKind::RParen)
                }
                ':' => self.single(TokenKind::Colon),
                ',' => self.single(TokenKind::Comma),
                '"' => self.string()?,
                '<' | '>' | '=' => self.comparator()?,
                c if c.is_ascii_digit() => self.number()?,
                c if c.is_ascii_alphabetic() || c == '_' => self.ident(),
                other => return self.error(start, format!("unexpected character `{other}`")),
            }
        }
        let pos = self.pos;
        self.push(TokenKind::Eof, pos);
        Ok(())
    }

    fn single(&mut self, kind: TokenKind) {
        let start = self.pos;
        self.bump();
        self.push(kind, start);
    }

    fn string(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        self.bump();
        let mut out = String::new();
        loop {
            let here = self.pos;
            match self.bump() {
                None => return self.error(start, "unterminated string"),
                Some('"') => break,
                Some('\n') => return self.error(here, "line break inside string (use \\n)"),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some(other) => {
                        return self.error(here, format!("unknown escape `\\{other}`"));
                    }
                    None => return self.error(start, "unterminated string"),
                },
                Some(c) => out.push(c),
            }
        }
        self.push(TokenKind::Str(out), start);
        Ok(())
    }

    fn comparator(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        let first = self.bump().unwrap_or_default();
        let eq = self.peek() == Some('=');
        let cmp = match (first, eq) {
            ('<', true) => Comparator::Le,
            ('<', false) => Comparator::Lt,
            ('>', true) => Comparator::Ge,
            ('>', false) => Comparator::Gt,
            ('=', true) => Comparator::Eq,
            _ => return self.error(start, "expected `==`"),
        };
        if eq {
            self.bump();
        }
        self.push(TokenKind::Cmp(cmp), start);
        Ok(())
    }

    fn number(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        let mut text = String::new();
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            text.push(c);
            self.bump();
        }
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            text.push('.');
            self.bump();
            while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                text.push(c);
                self.bump();
            }
        }
        match text.parse::<f64>() {
            Ok(n) if n.is_finite() => {
                self.push(TokenKind::Number(n), start);
                Ok(())
            }
            _ => self.error(start, format!("number `{text}` out of range")),
        }
    }

    fn ident(&mut self) {
        let start = self.pos;
        let mut text = String::new();
        while let Some(c) = self
            .peek()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '_' || *c == '-')
        {
            text.push(c);
            self.bump();
        }
        self.push(TokenKind::Ident(text), start);
    }
}

/// Sequential access over a token slice. The slice always ends in `Eof`.
pub struct Cursor<'t> {
    tokens: &'t [Token],
    idx: usize,
}

impl<'t> Cursor<'t> {
    pub fn new(tokens: &'t [Token]) -> Self {
        debug_assert!(matches!(tokens.last().map(|t| &t.kind), Some(TokenKind::Eof)));
        Cursor { tokens, idx: 0 }
    }

    pub fn peek(&self) -> &'t Token {
        &self.tokens[self.idx.min(self.tokens.len() - 1)]
    }

    pub fn peek_nth(&self, n: usize) -> &'t Token {
        &self.tokens[(self.idx + n).min(self.tokens.len() - 1)]
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> &'t Token {
        let t = self.peek();
        if self.idx < self.tokens.len() - 1 {
            self.idx += 1;
        }
        t
    }

    pub fn eat(&mut self, kind: &TokenKind) -> bool {
        if &self.peek().kind == kind {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn skip_newlines(&mut self) {
        while self.eat(&TokenKind::Newline) {}
    }
}
