use alloc::string::String;
use alloc::vec::Vec;

use super::parser::ParseError;
use super::Pos;

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Str(String),
    Number(f64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Arrow,
    OrOr,
    AndAnd,
    Bang,
    Ge,
    Le,
    Gt,
    Lt,
    EqEq,
    Ne,
    Question,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        use alloc::format;
        match self {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Str(s) => format!("string {s:?}"),
            TokenKind::Number(n) => format!("number {n}"),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Arrow => "`->`".into(),
            TokenKind::OrOr => "`||`".into(),
            TokenKind::AndAnd => "`&&`".into(),
            TokenKind::Bang => "`!`".into(),
            TokenKind::Ge => "`>=`".into(),
            TokenKind::Le => "`<=`".into(),
            TokenKind::Gt => "`>`".into(),
            TokenKind::Lt => "`<`".into(),
            TokenKind::EqEq => "`==`".into(),
            TokenKind::Ne => "`!=`".into(),
            TokenKind::Question => "`?`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

struct Cursor<'a> {
    chars: core::iter::Peekable<core::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }
}

/// Splits source text into tokens. `#` starts a comment running to the end of
/// the line. `=` is accepted as a synonym of `==`, and the symbols `≥ ≤ ≠`
/// as synonyms of their ASCII spellings.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor { chars: src.chars().peekable(), line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                cur.bump();
            } else if c == '#' {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
            } else {
                break;
            }
        }
        let pos = cur.pos();
        let Some(c) = cur.bump() else {
            out.push(Token { kind: TokenKind::Eof, pos });
            return Ok(out);
        };
        let kind = match c {
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            ':' => TokenKind::Colon,
            '?' => TokenKind::Question,
            '≥' => TokenKind::Ge,
            '≤' => TokenKind::Le,
            '≠' => TokenKind::Ne,
            '-' if cur.eat('>') => TokenKind::Arrow,
            '|' if cur.eat('|') => TokenKind::OrOr,
            '&' if cur.eat('&') => TokenKind::AndAnd,
            '!' => {
                if cur.eat('=') {
                    TokenKind::Ne
                } else {
                    TokenKind::Bang
                }
            }
            '>' => {
                if cur.eat('=') {
                    TokenKind::Ge
                } else {
                    TokenKind::Gt
                }
            }
            '<' => {
                if cur.eat('=') {
                    TokenKind::Le
                } else {
                    TokenKind::Lt
                }
            }
            '=' => {
                cur.eat('=');
                TokenKind::EqEq
            }
            '"' => TokenKind::Str(lex_string(&mut cur, pos)?),
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let mut text = String::new();
                text.push(c);
                lex_number(&mut cur, &mut text);
                let value: f64 =
                    text.parse().map_err(|_| ParseError::new(pos, alloc::format!("malformed number `{text}`")))?;
                TokenKind::Number(value)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut ident = String::new();
                ident.push(c);
                while let Some(c) = cur.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        ident.push(c);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                TokenKind::Ident(ident)
            }
            other => return Err(ParseError::new(pos, alloc::format!("unexpected character {other:?}"))),
        };
        out.push(Token { kind, pos });
    }
}

fn lex_number(cur: &mut Cursor<'_>, text: &mut String) {
    while let Some(c) = cur.peek() {
        if c.is_ascii_digit() || c == '.' {
            text.push(c);
            cur.bump();
        } else if c == 'e' || c == 'E' {
            text.push(c);
            cur.bump();
            if let Some(sign) = cur.peek().filter(|&s| s == '-' || s == '+') {
                text.push(sign);
                cur.bump();
            }
        } else {
            break;
        }
    }
}

fn lex_string(cur: &mut Cursor<'_>, start: Pos) -> Result<String, ParseError> {
    let mut s = String::new();
    loop {
        let pos = cur.pos();
        match cur.bump() {
            None => return Err(ParseError::new(start, "unterminated string")),
            Some('"') => return Ok(s),
            Some('\\') => match cur.bump() {
                Some('"') => s.push('"'),
                Some('\\') => s.push('\\'),
                Some('n') => s.push('\n'),
                Some('t') => s.push('\t'),
                Some(other) => return Err(ParseError::new(pos, alloc::format!("unknown escape `\\{other}`"))),
                None => return Err(ParseError::new(start, "unterminated string")),
            },
            Some(c) => s.push(c),
        }
    }
}
