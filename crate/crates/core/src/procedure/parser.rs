use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::lexer::{tokenize, Token, TokenKind};
use super::{Atom, AtomKind, Comparison, DecisionNode, NodeSpan, Pos, Predicate, ProcedureGraph, SpanPos, Target, Terminal};

/// A lexical or syntax error. `related` lists further positions the message
/// refers to, such as the first of two duplicate declarations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
    pub related: Vec<Pos>,
}

impl ParseError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        ParseError { pos, message: message.into(), related: Vec::new() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

impl core::error::Error for ParseError {}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let t = self.peek();
        ParseError::new(t.pos, format!("expected {wanted}, found {}", t.kind.describe()))
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Pos, ParseError> {
        if self.peek().kind == kind {
            Ok(self.next().pos)
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    fn is_keyword(&self, word: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == word)
    }

    fn keyword(&mut self, word: &str) -> Result<Pos, ParseError> {
        if self.is_keyword(word) {
            Ok(self.next().pos)
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        match &self.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => Err(self.unexpected("a string")),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                let pos = self.next().pos;
                Ok((s, pos))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn procedure(&mut self) -> Result<ProcedureGraph, ParseError> {
        self.keyword("procedure")?;
        let name = self.string()?;
        self.keyword("for")?;
        let disease_label = self.string()?;
        self.expect(TokenKind::LBrace)?;
        let mut start: Option<(String, Pos)> = None;
        let mut nodes: BTreeMap<String, DecisionNode> = BTreeMap::new();
        loop {
            if self.is_keyword("start") {
                let pos = self.next().pos;
                self.expect(TokenKind::Colon)?;
                let (id, _) = self.ident("a node id")?;
                if let Some((_, first)) = &start {
                    return Err(ParseError {
                        pos,
                        message: format!("duplicate `start` on line {} (first declared on line {})", pos.line, first.line),
                        related: alloc::vec![*first],
                    });
                }
                start = Some((id, pos));
            } else if self.is_keyword("node") {
                let node = self.node()?;
                if let Some(prev) = nodes.get(&node.id) {
                    return Err(ParseError {
                        pos: node.span.node,
                        message: format!(
                            "duplicate node id `{}` on line {} (first declared on line {})",
                            node.id, node.span.node.line, prev.span.node.line
                        ),
                        related: alloc::vec![prev.span.node],
                    });
                }
                nodes.insert(node.id.clone(), node);
            } else if self.peek().kind == TokenKind::RBrace {
                let pos = self.next().pos;
                let Some((start, start_pos)) = start else {
                    return Err(ParseError::new(pos, "procedure has no `start` declaration"));
                };
                if nodes.is_empty() {
                    return Err(ParseError::new(pos, "procedure declares no nodes"));
                }
                if self.peek().kind != TokenKind::Eof {
                    return Err(self.unexpected("end of input"));
                }
                return Ok(ProcedureGraph { name, disease_label, start, nodes, start_pos: SpanPos(start_pos) });
            } else {
                return Err(self.unexpected("`start`, `node` or `}`"));
            }
        }
    }

    fn node(&mut self) -> Result<DecisionNode, ParseError> {
        let node_pos = self.keyword("node")?;
        let (id, _) = self.ident("a node id")?;
        if id == "confirm" || id == "exclude" {
            return Err(ParseError::new(node_pos, format!("`{id}` is reserved for terminals")));
        }
        self.expect(TokenKind::LBrace)?;
        self.keyword("ask")?;
        self.expect(TokenKind::Colon)?;
        let ask = self.string()?;
        self.keyword("when")?;
        self.expect(TokenKind::Colon)?;
        let when = self.expr()?;
        let yes_pos = self.keyword("yes")?;
        self.expect(TokenKind::Arrow)?;
        let yes = self.target()?;
        let no_pos = self.keyword("no")?;
        self.expect(TokenKind::Arrow)?;
        let no = self.target()?;
        self.expect(TokenKind::RBrace)?;
        Ok(DecisionNode { id, ask, when, yes, no, span: NodeSpan { node: node_pos, yes: yes_pos, no: no_pos } })
    }

    fn target(&mut self) -> Result<Target, ParseError> {
        let (id, _) = self.ident("a node id, `confirm` or `exclude`")?;
        Ok(match id.as_str() {
            "confirm" => Target::Terminal(Terminal::Confirm),
            "exclude" => Target::Terminal(Terminal::Exclude),
            _ => Target::Node(id),
        })
    }

    fn expr(&mut self) -> Result<Predicate, ParseError> {
        let mut terms = alloc::vec![self.and()?];
        while self.peek().kind == TokenKind::OrOr {
            self.next();
            terms.push(self.and()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap_or_else(|| unreachable!()) } else { Predicate::Or(terms) })
    }

    fn and(&mut self) -> Result<Predicate, ParseError> {
        let mut terms = alloc::vec![self.unary()?];
        while self.peek().kind == TokenKind::AndAnd {
            self.next();
            terms.push(self.unary()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap_or_else(|| unreachable!()) } else { Predicate::And(terms) })
    }

    fn unary(&mut self) -> Result<Predicate, ParseError> {
        match self.peek().kind {
            TokenKind::Bang => {
                self.next();
                Ok(Predicate::Not(Box::new(self.unary()?)))
            }
            TokenKind::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            _ => Ok(Predicate::Atom(self.atom()?)),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let (kw, pos) = self.ident("`symptom`, `finding`, `flag`, `!` or `(`")?;
        self.expect(TokenKind::LParen)?;
        let name = self.string()?;
        self.expect(TokenKind::RParen)?;
        let kind = match kw.as_str() {
            "symptom" => AtomKind::Symptom { name },
            "flag" => AtomKind::Flag { name },
            "finding" => {
                let cmp = match self.next() {
                    Token { kind: TokenKind::Ge, .. } => Comparison::Ge,
                    Token { kind: TokenKind::Le, .. } => Comparison::Le,
                    Token { kind: TokenKind::Gt, .. } => Comparison::Gt,
                    Token { kind: TokenKind::Lt, .. } => Comparison::Lt,
                    Token { kind: TokenKind::EqEq, .. } => Comparison::Eq,
                    Token { kind: TokenKind::Ne, .. } => Comparison::Ne,
                    t => {
                        return Err(ParseError::new(
                            t.pos,
                            format!("expected a comparison after finding, found {}", t.kind.describe()),
                        ))
                    }
                };
                let value = match self.next() {
                    Token { kind: TokenKind::Number(v), .. } => v,
                    t => return Err(ParseError::new(t.pos, format!("expected a number, found {}", t.kind.describe()))),
                };
                AtomKind::Finding { name, cmp, value }
            }
            other => return Err(ParseError::new(pos, format!("unknown atom `{other}`"))),
        };
        let mut default_yes = false;
        if self.peek().kind == TokenKind::Question {
            self.next();
            match self.ident("`yes` or `no`")? {
                (w, _) if w == "yes" => default_yes = true,
                (w, _) if w == "no" => default_yes = false,
                (w, p) => return Err(ParseError::new(p, format!("missing-answer default must be `yes` or `no`, found `{w}`"))),
            }
        }
        Ok(Atom { kind, default_yes })
    }
}

/// Parses procedure source text.
pub fn parse(src: &str) -> Result<ProcedureGraph, ParseError> {
    let tokens = tokenize(src)?;
    Parser { tokens, at: 0 }.procedure()
}
