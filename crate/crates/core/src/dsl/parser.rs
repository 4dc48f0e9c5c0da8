//! Recursive-descent parser; the grammar is published in `docs/grammar.ebnf`.

use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::DslError;

/// Parses a whole program.
pub fn parse(tokens: &[Token]) -> Result<Ast, DslError> {
    let mut p = Parser { tokens, pos: 0 };
    let ast = p.program()?;
    Ok(ast)
}

/// Parses a bare statement list, as found inside a schema decomposition.
pub fn parse_statements(tokens: &[Token]) -> Result<Vec<Statement>, DslError> {
    let mut p = Parser { tokens, pos: 0 };
    let mut stmts = Vec::new();
    while !p.at_end() {
        stmts.push(p.statement()?);
    }
    Ok(stmts)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek2(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos + 1).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        match self.tokens.get(self.pos) {
            Some(t) => t.span,
            None => self.tokens.last().map(|t| t.span).unwrap_or(Span::new(1, 1)),
        }
    }

    fn error(&self, expected: &[&str]) -> DslError {
        DslError::Parse {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().map(TokenKind::describe).unwrap_or_else(|| "end of input".into()),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Span, DslError> {
        let span = self.span();
        if self.eat(&kind) {
            Ok(span)
        } else {
            Err(self.error(&[&format!("`{kind}`")]))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), DslError> {
        let span = self.span();
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok((name, span))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn ident_list(&mut self) -> Result<Vec<(String, Span)>, DslError> {
        let mut out = vec![self.ident()?];
        while self.eat(&TokenKind::Comma) {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn program(&mut self) -> Result<Ast, DslError> {
        let mut ast = Ast::default();
        loop {
            let kind = match self.peek() {
                Some(TokenKind::Input) => {
                    self.pos += 1;
                    match self.peek() {
                        Some(TokenKind::Scalar) => DeclKind::Scalar,
                        Some(TokenKind::Vector) => DeclKind::Vector,
                        _ => return Err(self.error(&["`scalar`", "`vector`"])),
                    }
                }
                Some(TokenKind::Collection) => DeclKind::Collection,
                Some(TokenKind::Subset) => DeclKind::Subset,
                _ => break,
            };
            self.pos += 1;
            loop {
                let (name, span) = self.ident()?;
                let size = if self.eat(&TokenKind::LBracket) {
                    let size = match self.peek() {
                        Some(TokenKind::Number(n)) if *n >= 0.0 && n.fract() == 0.0 => *n as u64,
                        _ => return Err(self.error(&["a size"])),
                    };
                    self.pos += 1;
                    self.expect(TokenKind::RBracket)?;
                    Some(size)
                } else {
                    None
                };
                ast.declarations.push(Declaration { name, kind, size, span });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        while !self.at_end() && self.peek() != Some(&TokenKind::Output) {
            ast.statements.push(self.statement()?);
        }
        if self.eat(&TokenKind::Output) {
            for (name, span) in self.ident_list()? {
                ast.outputs.push(OutputRef { name, span });
            }
        }
        if !self.at_end() {
            return Err(self.error(&["end of input"]));
        }
        Ok(ast)
    }

    fn statement(&mut self) -> Result<Statement, DslError> {
        let span = self.span();
        match self.peek() {
            Some(TokenKind::For) => {
                self.pos += 1;
                let (var, _) = self.ident()?;
                self.expect(TokenKind::In)?;
                let (collection, _) = self.ident()?;
                let filters = if self.eat(&TokenKind::Where) { self.conjunction()? } else { Vec::new() };
                let body = self.block()?;
                Ok(Statement::ForEach { var, collection, filters, body, span })
            }
            Some(TokenKind::If) => {
                self.pos += 1;
                let condition = self.conjunction()?;
                let then_body = self.block()?;
                let else_body = if self.eat(&TokenKind::Else) { self.block()? } else { Vec::new() };
                Ok(Statement::If { condition, then_body, else_body, span })
            }
            Some(TokenKind::Ident(_)) => self.assignment(),
            _ => Err(self.error(&["`for`", "`if`", "identifier"])),
        }
    }

    fn block(&mut self) -> Result<Vec<Statement>, DslError> {
        self.expect(TokenKind::LBrace)?;
        let mut body = vec![self.statement()?];
        while !self.eat(&TokenKind::RBrace) {
            if self.at_end() {
                return Err(self.error(&["`}`"]));
            }
            body.push(self.statement()?);
        }
        Ok(body)
    }

    fn conjunction(&mut self) -> Result<Vec<Comparison>, DslError> {
        let mut out = vec![self.comparison()?];
        while self.eat(&TokenKind::And) {
            out.push(self.comparison()?);
        }
        Ok(out)
    }

    fn comparison(&mut self) -> Result<Comparison, DslError> {
        let span = self.span();
        let lhs = self.expr()?;
        let Some(op) = self.cmp_op() else {
            return Err(self.error(&["`<`", "`<=`", "`>`", "`>=`", "`==`", "`!=`"]));
        };
        let rhs = self.expr()?;
        Ok(Comparison { lhs, op, rhs, span })
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek()? {
            TokenKind::Lt => CmpOp::Lt,
            TokenKind::Le => CmpOp::Le,
            TokenKind::Gt => CmpOp::Gt,
            TokenKind::Ge => CmpOp::Ge,
            TokenKind::EqEq => CmpOp::Eq,
            TokenKind::Ne => CmpOp::Ne,
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    fn assignment(&mut self) -> Result<Statement, DslError> {
        let span = self.span();
        let (name, tspan) = self.ident()?;
        let mut indices = Vec::new();
        if self.eat(&TokenKind::LBracket) {
            indices = self.ident_list()?.into_iter().map(|(n, _)| n).collect();
            self.expect(TokenKind::RBracket)?;
        }
        let target = Target { name, indices, span: tspan };
        self.expect(TokenKind::Eq)?;

        let reducer = match (self.peek(), self.peek2()) {
            (Some(TokenKind::Sum), Some(TokenKind::Over)) => Some(Reducer::Sum),
            (Some(TokenKind::Product), Some(TokenKind::Over)) => Some(Reducer::Product),
            (Some(TokenKind::Ident(name)), Some(TokenKind::Over)) => Some(Reducer::Named(name.clone())),
            _ => None,
        };
        if let Some(reducer) = reducer {
            self.pos += 2;
            let (var, _) = self.ident()?;
            self.expect(TokenKind::In)?;
            let (collection, _) = self.ident()?;
            let filters = if self.eat(&TokenKind::Where) { self.conjunction()? } else { Vec::new() };
            self.expect(TokenKind::Of)?;
            let mut body = vec![self.expr()?];
            while self.eat(&TokenKind::Comma) {
                body.push(self.expr()?);
            }
            return Ok(Statement::Accumulate { target, reducer, var, collection, filters, body, span });
        }

        let value = self.expr_or_compare()?;
        Ok(Statement::Assign { target, value, span })
    }

    fn expr_or_compare(&mut self) -> Result<Expr, DslError> {
        let span = self.span();
        let lhs = self.expr()?;
        match self.cmp_op() {
            Some(op) => {
                let rhs = self.expr()?;
                Ok(Expr::Compare(Box::new(Comparison { lhs, op, rhs, span })))
            }
            None => Ok(lhs),
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let span = self.span();
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Star) => BinOp::Mul,
                Some(TokenKind::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            let span = self.span();
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        let span = self.span();
        if self.eat(&TokenKind::Minus) {
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner), span));
        }
        self.primary()
    }

    fn args(&mut self, close: TokenKind) -> Result<Vec<Expr>, DslError> {
        let mut out = Vec::new();
        if self.eat(&close) {
            return Ok(out);
        }
        out.push(self.expr()?);
        while self.eat(&TokenKind::Comma) {
            out.push(self.expr()?);
        }
        self.expect(close)?;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let span = self.span();
        match self.peek().cloned() {
            Some(TokenKind::Number(n)) => {
                self.pos += 1;
                Ok(Expr::Number(n, span))
            }
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                if self.eat(&TokenKind::LBracket) {
                    let indices = self.args(TokenKind::RBracket)?;
                    if indices.is_empty() {
                        return Err(self.error(&["index expression"]));
                    }
                    Ok(Expr::Index { name, indices, span })
                } else if self.eat(&TokenKind::LParen) {
                    let args = self.args(TokenKind::RParen)?;
                    Ok(Expr::Call { name, args, span })
                } else {
                    Ok(Expr::Var(name, span))
                }
            }
            Some(kw @ (TokenKind::Sum | TokenKind::Product)) => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let args = self.args(TokenKind::RParen)?;
                Ok(Expr::Call { name: kw.to_string(), args, span })
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let inner = self.expr_or_compare()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            _ => Err(self.error(&["number", "identifier", "`(`", "`-`"])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::tokenize;

    fn parse_src(src: &str) -> Result<Ast, DslError> {
        parse(&tokenize(src)?)
    }

    #[test]
    fn single_assignment() {
        let ast = parse_src("input scalar a, b\nx = a + b").unwrap();
        assert_eq!(ast.statements.len(), 1);
        match &ast.statements[0] {
            Statement::Assign { target, value: Expr::Binary { op: BinOp::Add, .. }, .. } => {
                assert_eq!(target.name, "x")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn revenue_accumulation_with_filters() {
        let ast = parse_src(
            "input vector price, qty\ncollection items\n\
             revenue = sum over i in items where price[i] > 10 and qty[i] > 100 of price[i] * qty[i]\n\
             output revenue",
        )
        .unwrap();
        match &ast.statements[0] {
            Statement::Accumulate { reducer: Reducer::Sum, filters, body, .. } => {
                assert_eq!(filters.len(), 2);
                assert!(matches!(body[0], Expr::Binary { op: BinOp::Mul, .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(ast.outputs[0].name, "revenue");
    }

    #[test]
    fn sum_call_and_named_reducer() {
        let ast = parse_src("input scalar a, b, c\nsubset S\nm = average over s in S of a\nt = sum(a, b, c)")
            .unwrap();
        assert!(matches!(&ast.statements[0], Statement::Accumulate { reducer: Reducer::Named(n), .. } if n == "average"));
        assert!(matches!(&ast.statements[1], Statement::Assign { value: Expr::Call { name, .. }, .. } if name == "sum"));
    }

    #[test]
    fn precedence_and_grouping() {
        let ast = parse_src("input scalar a, b, c\nx = a - b * c\ny = (a - b) * c").unwrap();
        let Statement::Assign { value: x, .. } = &ast.statements[0] else { panic!() };
        let Statement::Assign { value: y, .. } = &ast.statements[1] else { panic!() };
        assert!(matches!(x, Expr::Binary { op: BinOp::Sub, .. }));
        assert!(matches!(y, Expr::Binary { op: BinOp::Mul, .. }));
    }

    #[test]
    fn parse_error_carries_expected_set() {
        match parse_src("x = ") {
            Err(DslError::Parse { expected, .. }) => assert!(expected.contains(&"identifier".to_string())),
            other => panic!("unexpected {other:?}"),
        }
        match parse_src("for i in C x = 1") {
            Err(DslError::Parse { span, expected, .. }) => {
                assert_eq!(span, Span::new(1, 12));
                assert_eq!(expected, vec!["`{`".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_block_is_rejected() {
        assert!(matches!(parse_src("collection C\nfor i in C { }"), Err(DslError::Parse { .. })));
    }
}
