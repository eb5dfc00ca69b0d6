//! Recursive descent parser for MiniOO. Expressions use precedence climbing.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;

/// Maximum syntactic nesting (blocks and expressions) accepted by the parser.
pub const MAX_NESTING: usize = 200;

const PLACEHOLDER: NodeId = NodeId(0);

pub fn parse(source: &str) -> Result<Program, SyntaxError> {
    parse_named(source, "<input>")
}

/// Parses `source`, recording `source_id` as its corpus-relative path.
pub fn parse_named(source: &str, source_id: &str) -> Result<Program, SyntaxError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0, depth: 0 };
    let mut classes = Vec::new();
    while parser.peek() != &Tok::Eof {
        classes.push(parser.class_decl()?);
    }
    if classes.is_empty() {
        let t = parser.current();
        return Err(SyntaxError::at(t, "expected at least one class declaration"));
    }
    let mut program = Program { source_id: source_id.to_string(), classes };
    let mut next = 0;
    renumber_program(&mut program, &mut next);
    Ok(program)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl SyntaxError {
    fn at(t: &Token, message: impl Into<String>) -> Self {
        SyntaxError { line: t.line, col: t.col, message: message.into() }
    }
}

fn span_of(t: &Token) -> Span {
    Span::new(t.line, t.col, t.len)
}

fn span_between(start: &Token, end: &Token) -> Span {
    let len = if start.line == end.line { end.col + end.len - start.col } else { start.len };
    Span::new(start.line, start.col, len)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn current(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, SyntaxError> {
        if self.peek() == &tok {
            Ok(self.bump())
        } else {
            let t = self.current();
            Err(SyntaxError::at(t, format!("expected {what}, found {}", t.tok.describe())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token), SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let t = self.bump();
                Ok((name, t))
            }
            _ => {
                let t = self.current();
                Err(SyntaxError::at(t, format!("expected {what}, found {}", t.tok.describe())))
            }
        }
    }

    fn enter(&mut self) -> Result<(), SyntaxError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(SyntaxError::at(self.current(), "nesting too deep"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn class_decl(&mut self) -> Result<ClassDecl, SyntaxError> {
        let start = self.expect(Tok::Class, "`class`")?;
        let (name, _) = self.ident("class name")?;
        let open = self.expect(Tok::LBrace, "`{`")?;
        let mut fields = Vec::new();
        let mut constructor: Option<MethodDecl> = None;
        let mut methods = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => return Err(SyntaxError::at(&open, "unterminated class body")),
                _ => {}
            }
            let member_start = self.current().clone();
            let visibility = match self.peek() {
                Tok::Public => {
                    self.bump();
                    Some(Visibility::Public)
                }
                Tok::Hidden => {
                    self.bump();
                    Some(Visibility::Hidden)
                }
                _ => None,
            };
            let is_ctor = matches!(self.peek(), Tok::Ident(n) if *n == name)
                && self.peek_at(1) == &Tok::LParen;
            if is_ctor {
                let name_tok = self.bump();
                if constructor.is_some() {
                    return Err(SyntaxError::at(&name_tok, format!("duplicate constructor for `{name}`")));
                }
                let params = self.params()?;
                let body = self.block()?;
                constructor = Some(MethodDecl {
                    id: PLACEHOLDER,
                    span: span_of(&member_start),
                    name: name.clone(),
                    visibility: visibility.unwrap_or(Visibility::Public),
                    params,
                    ret: Type::Void,
                    body,
                    is_constructor: true,
                });
                continue;
            }
            let ty_tok = self.current().clone();
            let ty = self.ty()?;
            let (member_name, _) = self.ident("member name")?;
            if self.peek() == &Tok::LParen {
                let params = self.params()?;
                let body = self.block()?;
                methods.push(MethodDecl {
                    id: PLACEHOLDER,
                    span: span_of(&member_start),
                    name: member_name,
                    visibility: visibility.unwrap_or(Visibility::Public),
                    params,
                    ret: ty,
                    body,
                    is_constructor: false,
                });
            } else {
                let end = self.expect(Tok::Semi, "`;` or `(`")?;
                let Some(visibility) = visibility else {
                    return Err(SyntaxError::at(&member_start, "field declarations require `public` or `hidden`"));
                };
                if ty == Type::Void {
                    return Err(SyntaxError::at(&ty_tok, "fields cannot have type `void`"));
                }
                fields.push(FieldDecl {
                    id: PLACEHOLDER,
                    span: span_between(&member_start, &end),
                    name: member_name,
                    ty,
                    visibility,
                });
            }
        }
        let constructor = constructor.unwrap_or_else(|| MethodDecl {
            id: PLACEHOLDER,
            span: span_of(&start),
            name: name.clone(),
            visibility: Visibility::Public,
            params: Vec::new(),
            ret: Type::Void,
            body: Vec::new(),
            is_constructor: true,
        });
        Ok(ClassDecl { id: PLACEHOLDER, span: span_of(&start), name, fields, constructor, methods })
    }

    fn ty(&mut self) -> Result<Type, SyntaxError> {
        let t = self.bump();
        Ok(match t.tok.clone() {
            Tok::IntKw => Type::Int,
            Tok::BoolKw => Type::Bool,
            Tok::Void => Type::Void,
            Tok::Ident(name) => Type::Class(name),
            other => {
                return Err(SyntaxError::at(&t, format!("expected a type, found {}", other.describe())))
            }
        })
    }

    fn params(&mut self) -> Result<Vec<Param>, SyntaxError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(params);
        }
        loop {
            let start = self.current().clone();
            let ty = self.ty()?;
            if ty == Type::Void {
                return Err(SyntaxError::at(&start, "parameters cannot have type `void`"));
            }
            let (name, _) = self.ident("parameter name")?;
            params.push(Param { id: PLACEHOLDER, span: span_of(&start), name, ty });
            if self.eat(&Tok::RParen) {
                return Ok(params);
            }
            self.expect(Tok::Comma, "`,` or `)`")?;
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        let open = self.expect(Tok::LBrace, "`{`")?;
        self.enter()?;
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => return Err(SyntaxError::at(&open, "unterminated block")),
                _ => stmts.push(self.stmt()?),
            }
        }
        self.leave();
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.current().clone();
        let span = span_of(&start);
        let kind = match self.peek() {
            Tok::If => self.if_stmt()?,
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            Tok::Return => {
                self.bump();
                let value = if self.peek() == &Tok::Semi { None } else { Some(self.expr()?) };
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Return(value)
            }
            Tok::Skip => {
                self.bump();
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Skip
            }
            Tok::IntKw | Tok::BoolKw => self.local()?,
            Tok::Ident(_) if matches!(self.peek_at(1), Tok::Ident(_)) => self.local()?,
            _ => {
                let lhs = self.expr()?;
                if self.eat(&Tok::Assign) {
                    if !matches!(lhs.kind, ExprKind::Var(_) | ExprKind::Field { .. }) {
                        return Err(SyntaxError::at(&start, "left-hand side of `=` must be a variable or field"));
                    }
                    let value = self.expr()?;
                    self.expect(Tok::Semi, "`;`")?;
                    StmtKind::Assign { target: lhs, value }
                } else {
                    self.expect(Tok::Semi, "`;`")?;
                    StmtKind::Expr(lhs)
                }
            }
        };
        Ok(Stmt { id: PLACEHOLDER, span, kind })
    }

    fn if_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        self.expect(Tok::If, "`if`")?;
        self.expect(Tok::LParen, "`(`")?;
        let cond = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        let then_branch = self.block()?;
        let else_branch = if self.eat(&Tok::Else) {
            if self.peek() == &Tok::If {
                // `else if` nests the chained `if` inside the else block.
                let start = self.current().clone();
                self.enter()?;
                let kind = self.if_stmt()?;
                self.leave();
                vec![Stmt { id: PLACEHOLDER, span: span_of(&start), kind }]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(StmtKind::If { cond, then_branch, else_branch })
    }

    fn local(&mut self) -> Result<StmtKind, SyntaxError> {
        let ty_tok = self.current().clone();
        let ty = self.ty()?;
        if ty == Type::Void {
            return Err(SyntaxError::at(&ty_tok, "locals cannot have type `void`"));
        }
        let (name, _) = self.ident("local name")?;
        self.expect(Tok::Assign, "`=`")?;
        let init = self.expr()?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(StmtKind::Local { ty, name, init })
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, SyntaxError> {
        self.enter()?;
        let mut lhs = self.unary()?;
        while let Some(op) = binop_of(self.peek()) {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let span = Span::new(lhs.span.line, lhs.span.col, lhs.span.len);
            lhs = Expr {
                id: PLACEHOLDER,
                span,
                kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) },
            };
        }
        self.leave();
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.current().clone();
        match self.peek() {
            Tok::Bang => {
                self.bump();
                self.enter()?;
                let operand = self.unary()?;
                self.leave();
                Ok(Expr {
                    id: PLACEHOLDER,
                    span: span_of(&start),
                    kind: ExprKind::Unary { op: UnOp::Not, operand: Box::new(operand) },
                })
            }
            Tok::Minus => {
                self.bump();
                if let Tok::Int(magnitude) = *self.peek() {
                    let lit = self.bump();
                    if magnitude > i64::MAX as u64 + 1 {
                        return Err(SyntaxError::at(&lit, "integer literal out of range"));
                    }
                    let value = (magnitude as i64).wrapping_neg();
                    return Ok(Expr {
                        id: PLACEHOLDER,
                        span: span_between(&start, &lit),
                        kind: ExprKind::Int(value),
                    });
                }
                self.enter()?;
                let operand = self.unary()?;
                self.leave();
                Ok(Expr {
                    id: PLACEHOLDER,
                    span: span_of(&start),
                    kind: ExprKind::Unary { op: UnOp::Neg, operand: Box::new(operand) },
                })
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<Expr, SyntaxError> {
        let mut expr = self.primary()?;
        while self.peek() == &Tok::Dot {
            self.bump();
            let (name, _) = self.ident("member name")?;
            let span = Span::new(expr.span.line, expr.span.col, expr.span.len);
            if self.peek() == &Tok::LParen {
                let args = self.args()?;
                expr = Expr {
                    id: PLACEHOLDER,
                    span,
                    kind: ExprKind::Call { receiver: Some(Box::new(expr)), method: name, args },
                };
            } else {
                expr = Expr {
                    id: PLACEHOLDER,
                    span,
                    kind: ExprKind::Field { receiver: Box::new(expr), name },
                };
            }
        }
        Ok(expr)
    }

    fn args(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            self.expect(Tok::Comma, "`,` or `)`")?;
        }
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let t = self.bump();
        let span = span_of(&t);
        let kind = match t.tok.clone() {
            Tok::Int(magnitude) => {
                if magnitude > i64::MAX as u64 {
                    return Err(SyntaxError::at(&t, "integer literal out of range"));
                }
                ExprKind::Int(magnitude as i64)
            }
            Tok::True => ExprKind::Bool(true),
            Tok::False => ExprKind::Bool(false),
            Tok::Null => ExprKind::Null,
            Tok::This => ExprKind::This,
            Tok::New => {
                let (class, _) = self.ident("class name")?;
                let args = self.args()?;
                ExprKind::New { class, args }
            }
            Tok::Ident(name) => {
                if self.peek() == &Tok::LParen {
                    let args = self.args()?;
                    ExprKind::Call { receiver: None, method: name, args }
                } else {
                    ExprKind::Var(name)
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(inner);
            }
            other => {
                let msg = format!("expected an expression, found {}", other.describe());
                return Err(SyntaxError::at(&t, msg));
            }
        };
        Ok(Expr { id: PLACEHOLDER, span, kind })
    }
}

fn binop_of(tok: &Tok) -> Option<BinOp> {
    Some(match tok {
        Tok::Plus => BinOp::Add,
        Tok::Minus => BinOp::Sub,
        Tok::Star => BinOp::Mul,
        Tok::Slash => BinOp::Div,
        Tok::Percent => BinOp::Rem,
        Tok::Lt => BinOp::Lt,
        Tok::Le => BinOp::Le,
        Tok::Gt => BinOp::Gt,
        Tok::Ge => BinOp::Ge,
        Tok::EqEq => BinOp::Eq,
        Tok::NotEq => BinOp::Ne,
        Tok::AndAnd => BinOp::And,
        Tok::OrOr => BinOp::Or,
        _ => return None,
    })
}
