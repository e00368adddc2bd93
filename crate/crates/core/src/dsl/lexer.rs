use std::fmt;

/// Byte range plus the 1-based line/column of its first character.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn to(self, other: Span) -> Span {
        Span {
            end: other.end,
            ..self
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Name(String),
    Number(f64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Equals,
    Dot,
    Arrow,
    Eof,
}

impl TokenKind {
    /// How the token is named in "expected ..." messages.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Name(n) => format!("name `{n}`"),
            TokenKind::Number(x) => format!("number `{x}`"),
            TokenKind::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    pub(crate) fn symbol(&self) -> &'static str {
        match self {
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::LBrace => "{",
            TokenKind::RBrace => "}",
            TokenKind::Semi => ";",
            TokenKind::Comma => ",",
            TokenKind::Equals => "=",
            TokenKind::Dot => ".",
            TokenKind::Arrow => "->",
            TokenKind::Name(_) => "NAME",
            TokenKind::Number(_) => "NUMBER",
            TokenKind::Eof => "EOF",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn eat_while(&mut self, f: impl Fn(char) -> bool) {
        while self.peek().is_some_and(&f) {
            self.bump();
        }
    }

    fn here(&self) -> Span {
        Span {
            start: self.pos,
            end: self.pos,
            line: self.line,
            col: self.col,
        }
    }
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits `src` into tokens; the last token is always `Eof`.
///
/// Numbers are decimal reals with an optional sign and exponent, e.g.
/// `-9.81`, `.5`, `1e-3`. A `-` directly followed by `>` is an arrow.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        // whitespace and comments
        loop {
            match (cur.peek(), cur.peek2()) {
                (Some(c), _) if c.is_whitespace() => {
                    cur.bump();
                }
                (Some('/'), Some('/')) => cur.eat_while(|c| c != '\n'),
                _ => break,
            }
        }
        let start = cur.here();
        let Some(c) = cur.peek() else {
            out.push(Token {
                kind: TokenKind::Eof,
                span: start,
            });
            return Ok(out);
        };
        let kind = match c {
            '(' => single(&mut cur, TokenKind::LParen),
            ')' => single(&mut cur, TokenKind::RParen),
            '{' => single(&mut cur, TokenKind::LBrace),
            '}' => single(&mut cur, TokenKind::RBrace),
            ';' => single(&mut cur, TokenKind::Semi),
            ',' => single(&mut cur, TokenKind::Comma),
            '=' => single(&mut cur, TokenKind::Equals),
            '-' if cur.peek2() == Some('>') => {
                cur.bump();
                cur.bump();
                TokenKind::Arrow
            }
            '.' if !cur.peek2().is_some_and(|d| d.is_ascii_digit()) => {
                single(&mut cur, TokenKind::Dot)
            }
            c if is_name_start(c) => {
                cur.eat_while(is_name_char);
                TokenKind::Name(src[start.start..cur.pos].to_string())
            }
            c if c.is_ascii_digit() || matches!(c, '.' | '-' | '+') => number(&mut cur, start)?,
            other => {
                cur.bump();
                return Err(LexError {
                    span: Span {
                        end: cur.pos,
                        ..start
                    },
                    message: format!("unexpected character {other:?}"),
                });
            }
        };
        out.push(Token {
            kind,
            span: Span {
                end: cur.pos,
                ..start
            },
        });
    }
}

fn single(cur: &mut Cursor, kind: TokenKind) -> TokenKind {
    cur.bump();
    kind
}

fn number(cur: &mut Cursor, start: Span) -> Result<TokenKind, LexError> {
    if matches!(cur.peek(), Some('-' | '+')) {
        cur.bump();
    }
    let digits_before = cur.pos;
    cur.eat_while(|c| c.is_ascii_digit());
    let mut mantissa = cur.pos > digits_before;
    if cur.peek() == Some('.') {
        cur.bump();
        let frac = cur.pos;
        cur.eat_while(|c| c.is_ascii_digit());
        mantissa |= cur.pos > frac;
    }
    let fail = |cur: &Cursor, message: String| LexError {
        span: Span {
            end: cur.pos,
            ..start
        },
        message,
    };
    if !mantissa {
        return Err(fail(cur, "malformed number".into()));
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        cur.bump();
        if matches!(cur.peek(), Some('-' | '+')) {
            cur.bump();
        }
        let exp = cur.pos;
        cur.eat_while(|c| c.is_ascii_digit());
        if cur.pos == exp {
            return Err(fail(cur, "malformed exponent".into()));
        }
    }
    if cur.peek().is_some_and(is_name_char) {
        return Err(fail(cur, "malformed number".into()));
    }
    let text = &cur.src[start.start..cur.pos];
    match text.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(TokenKind::Number(x)),
        _ => Err(fail(cur, format!("number `{text}` is out of range"))),
    }
}
