use std::fmt;

use super::ast::*;
use super::lexer::{tokenize, Span, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: Span,
    /// Token descriptions that would have been accepted, sorted.
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.span.line, self.span.col)?;
        match self.expected.as_slice() {
            [] => write!(f, "{}", self.found),
            [one] => write!(f, "expected {one}, found {}", self.found),
            many => write!(
                f,
                "expected one of {}, found {}",
                many.join(", "),
                self.found
            ),
        }
    }
}

impl std::error::Error for ParseError {}

/// Parses a whole `.cbd` source text.
pub fn parse(src: &str) -> Result<SourceModel, ParseError> {
    let tokens = tokenize(src).map_err(|e| ParseError {
        span: e.span,
        expected: Vec::new(),
        found: e.message,
    })?;
    let mut p = Parser { tokens, pos: 0 };
    let mut definitions = Vec::new();
    while !p.at(&TokenKind::Eof) {
        if !p.at_keyword("cbd") {
            return Err(p.error(&["`cbd`", "end of input"]));
        }
        definitions.push(p.definition()?);
    }
    Ok(SourceModel { definitions })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, ahead: usize) -> &Token {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i]
    }

    fn at(&self, kind: &TokenKind) -> bool {
        std::mem::discriminant(&self.peek().kind) == std::mem::discriminant(kind)
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Name(n) if n == kw)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let mut expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        expected.sort();
        expected.dedup();
        let t = self.peek();
        ParseError {
            span: t.span,
            expected,
            found: t.kind.describe(),
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Span, ParseError> {
        if self.at(&kind) {
            Ok(self.bump().span)
        } else {
            Err(self.error(&[&format!("`{}`", kind.symbol())]))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<Span, ParseError> {
        if self.at_keyword(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    fn ident(&mut self) -> Result<Ident, ParseError> {
        match &self.peek().kind {
            TokenKind::Name(n) => {
                let name = n.clone();
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.error(&["NAME"])),
        }
    }

    fn number(&mut self) -> Result<(f64, Span), ParseError> {
        match self.peek().kind {
            TokenKind::Number(x) => Ok((x, self.bump().span)),
            _ => Err(self.error(&["NUMBER"])),
        }
    }

    fn definition(&mut self) -> Result<SourceDefinition, ParseError> {
        let start = self.keyword("cbd")?;
        let name = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let mut ports = Vec::new();
        if !self.at(&TokenKind::RParen) {
            loop {
                self.port_decl(&mut ports)?;
                if self.at(&TokenKind::Semi) {
                    self.bump();
                } else if self.at(&TokenKind::RParen) {
                    break;
                } else {
                    return Err(self.error(&["`,`", "`;`", "`)`"]));
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::LBrace)?;
        let mut items = Vec::new();
        while !self.at(&TokenKind::RBrace) {
            if !self.at(&TokenKind::Name(String::new())) {
                return Err(self.error(&["`block`", "NAME", "`}`"]));
            }
            let is_block =
                self.at_keyword("block") && matches!(self.peek_at(1).kind, TokenKind::Name(_));
            items.push(if is_block {
                Item::Block(self.block_decl()?)
            } else {
                Item::Link(self.link()?)
            });
        }
        let end = self.expect(TokenKind::RBrace)?;
        Ok(SourceDefinition {
            name,
            ports,
            items,
            span: start.to(end),
        })
    }

    fn port_decl(&mut self, ports: &mut Vec<PortDecl>) -> Result<(), ParseError> {
        let direction = if self.at_keyword("in") {
            Direction::In
        } else if self.at_keyword("out") {
            Direction::Out
        } else {
            return Err(self.error(&["`in`", "`out`"]));
        };
        self.bump();
        loop {
            ports.push(PortDecl {
                direction,
                name: self.ident()?,
            });
            if !self.at(&TokenKind::Comma) {
                return Ok(());
            }
            self.bump();
        }
    }

    fn block_decl(&mut self) -> Result<BlockDecl, ParseError> {
        let start = self.keyword("block")?;
        let name = self.ident()?;
        self.expect(TokenKind::Equals)?;
        let kind = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        if !self.at(&TokenKind::RParen) {
            loop {
                args.push(self.arg()?);
                if self.at(&TokenKind::Comma) {
                    self.bump();
                } else if self.at(&TokenKind::RParen) {
                    break;
                } else {
                    return Err(self.error(&["`,`", "`)`"]));
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        let end = self.expect(TokenKind::Semi)?;
        Ok(BlockDecl {
            name,
            kind,
            args,
            span: start.to(end),
        })
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        match self.peek().kind {
            TokenKind::Number(_) => {
                let (value, span) = self.number()?;
                Ok(Arg {
                    name: None,
                    value,
                    span,
                })
            }
            TokenKind::Name(_) => {
                let name = self.ident()?;
                self.expect(TokenKind::Equals)?;
                let (value, end) = self.number()?;
                Ok(Arg {
                    span: name.span.to(end),
                    name: Some(name),
                    value,
                })
            }
            _ => Err(self.error(&["NUMBER", "NAME"])),
        }
    }

    fn endpoint(&mut self, after: &[&str]) -> Result<Endpoint, ParseError> {
        let first = self.ident()?;
        if self.at(&TokenKind::Dot) {
            self.bump();
            let port = self.ident()?;
            return Ok(Endpoint {
                span: first.span.to(port.span),
                block: Some(first),
                port,
            });
        }
        if !after.iter().any(|a| self.at_symbol(a)) {
            let mut expected = vec!["`.`"];
            expected.extend(after);
            return Err(self.error(&expected));
        }
        Ok(Endpoint {
            span: first.span,
            block: None,
            port: first,
        })
    }

    fn at_symbol(&self, quoted: &str) -> bool {
        format!("`{}`", self.peek().kind.symbol()) == quoted
    }

    fn link(&mut self) -> Result<LinkDecl, ParseError> {
        let from = self.endpoint(&["`->`"])?;
        self.expect(TokenKind::Arrow)?;
        let to = self.endpoint(&["`;`"])?;
        let end = self.expect(TokenKind::Semi)?;
        Ok(LinkDecl {
            span: from.span.to(end),
            from,
            to,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_model() {
        let m = parse("cbd Main(out y){ block c = Constant(9.81); c.out -> y; }").unwrap();
        assert_eq!(m.definitions.len(), 1);
        let d = &m.definitions[0];
        assert_eq!(d.blocks().count(), 1);
        assert_eq!(d.links().count(), 1);
        let b = d.blocks().next().unwrap();
        assert_eq!(b.kind.name, "Constant");
        assert_eq!(b.args[0].value, 9.81);
        let l = d.links().next().unwrap();
        assert_eq!(l.from.to_string(), "c.out");
        assert_eq!(l.to.to_string(), "y");
    }

    #[test]
    fn ports_and_named_args() {
        let m = parse(
            "cbd F(in a, b; out y) {\n  block m = Multiplier(inputs = 2);\n  a -> m.in1; b -> m.in2; m.out -> y;\n}",
        )
        .unwrap();
        let d = &m.definitions[0];
        let ins: Vec<_> = d.ports(Direction::In).map(|i| i.name.as_str()).collect();
        assert_eq!(ins, ["a", "b"]);
        assert_eq!(d.ports(Direction::Out).count(), 1);
        let b = d.blocks().next().unwrap();
        assert_eq!(b.args[0].name.as_ref().unwrap().name, "inputs");
        assert_eq!((b.span.line, b.span.col), (2, 3));
    }

    #[test]
    fn empty_model_and_empty_definition() {
        assert!(parse("  // nothing\n").unwrap().definitions.is_empty());
        assert!(parse("cbd E() {}").unwrap().definitions[0].items.is_empty());
    }

    #[test]
    fn block_can_be_a_block_name() {
        let m = parse("cbd M(out y) { block block = Negator(); block.out -> y; }").unwrap();
        assert_eq!(m.definitions[0].items.len(), 2);
    }

    #[test]
    fn missing_semicolon_names_position() {
        let err = parse("cbd Main(out y){\n  block c = Constant(1)\n  c.out -> y;\n}").unwrap_err();
        assert_eq!((err.span.line, err.span.col), (3, 3));
        assert_eq!(err.expected, vec!["`;`"]);
        assert!(err
            .to_string()
            .starts_with("line 3, column 3: expected `;`"));
    }

    #[test]
    fn expected_sets() {
        let err = parse("cbd M(out y) { a ; }").unwrap_err();
        assert_eq!(err.expected, vec!["`->`", "`.`"]);
        let err = parse("cbd M(inout y) {}").unwrap_err();
        assert_eq!(err.expected, vec!["`in`", "`out`"]);
        let err = parse("block").unwrap_err();
        assert_eq!(err.expected, vec!["`cbd`", "end of input"]);
        let err = parse("cbd M() { block b = K(1 2); }").unwrap_err();
        assert_eq!(err.expected, vec!["`)`", "`,`"]);
    }

    #[test]
    fn lexical_errors_are_located() {
        let err = parse("cbd M() {\n  $ }").unwrap_err();
        assert_eq!((err.span.line, err.span.col), (2, 3));
    }
}
