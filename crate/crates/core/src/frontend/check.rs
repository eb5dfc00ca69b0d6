//! Name resolution, typing, visibility, and return-path checks.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticErrorKind {
    TypeError,
    NameError,
    VisibilityError,
    DuplicateError,
    MissingReturn,
}

impl StaticErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StaticErrorKind::TypeError => "type_error",
            StaticErrorKind::NameError => "name_error",
            StaticErrorKind::VisibilityError => "visibility_error",
            StaticErrorKind::DuplicateError => "duplicate_error",
            StaticErrorKind::MissingReturn => "missing_return",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StaticError {
    pub kind: StaticErrorKind,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl fmt::Display for StaticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.col, self.kind.as_str(), self.message)
    }
}

/// Static type of every expression node in a well-typed program.
#[derive(Debug, Clone, Default)]
pub struct TypeTable {
    types: HashMap<NodeId, Type>,
}

impl TypeTable {
    pub fn get(&self, id: NodeId) -> Option<&Type> {
        self.types.get(&id)
    }
}

pub fn check_program(p: &Program) -> Vec<StaticError> {
    check_program_typed(p).0
}

/// Checks `p` and returns the diagnostics together with the types the checker
/// inferred. Errors are ordered by class then source position.
pub fn check_program_typed(p: &Program) -> (Vec<StaticError>, TypeTable) {
    let mut ck = Checker { program: p, errors: Vec::new(), types: TypeTable::default() };
    ck.run();
    let mut errors = ck.errors;
    errors.sort_by(|a, b| (a.line, a.col, &a.message).cmp(&(b.line, b.col, &b.message)));
    (errors, ck.types)
}

struct Checker<'p> {
    program: &'p Program,
    errors: Vec<StaticError>,
    types: TypeTable,
}

struct Scope<'a> {
    class: &'a ClassDecl,
    method: &'a MethodDecl,
    locals: Vec<(String, Type)>,
}

impl<'a> Scope<'a> {
    fn lookup(&self, name: &str) -> Option<&Type> {
        self.locals.iter().rev().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

impl<'p> Checker<'p> {
    fn error(&mut self, kind: StaticErrorKind, span: Span, message: impl Into<String>) {
        self.errors.push(StaticError { kind, line: span.line, col: span.col, message: message.into() });
    }

    fn class(&self, name: &str) -> Option<&'p ClassDecl> {
        self.program.class(name)
    }

    fn run(&mut self) {
        let mut seen = HashSet::new();
        for class in &self.program.classes {
            if !seen.insert(class.name.as_str()) {
                self.error(StaticErrorKind::DuplicateError, class.span, format!("duplicate class `{}`", class.name));
            }
        }
        for class in &self.program.classes {
            self.check_class(class);
        }
    }

    fn check_type_exists(&mut self, ty: &Type, span: Span) {
        if let Type::Class(name) = ty {
            if self.class(name).is_none() {
                self.error(StaticErrorKind::NameError, span, format!("unknown class `{name}`"));
            }
        }
    }

    fn check_class(&mut self, class: &'p ClassDecl) {
        let mut fields = HashSet::new();
        for f in &class.fields {
            if !fields.insert(f.name.as_str()) {
                self.error(StaticErrorKind::DuplicateError, f.span, format!("duplicate field `{}`", f.name));
            }
            self.check_type_exists(&f.ty, f.span);
        }
        let mut methods = HashSet::new();
        for m in &class.methods {
            if !methods.insert(m.name.as_str()) {
                self.error(StaticErrorKind::DuplicateError, m.span, format!("duplicate method `{}`", m.name));
            }
        }
        for m in class.callables() {
            self.check_method(class, m);
        }
    }

    fn check_method(&mut self, class: &'p ClassDecl, m: &'p MethodDecl) {
        self.check_type_exists(&m.ret, m.span);
        let mut scope = Scope { class, method: m, locals: Vec::new() };
        for p in &m.params {
            self.check_type_exists(&p.ty, p.span);
            if scope.lookup(&p.name).is_some() {
                self.error(StaticErrorKind::DuplicateError, p.span, format!("duplicate parameter `{}`", p.name));
            }
            scope.locals.push((p.name.clone(), p.ty.clone()));
        }
        self.check_block(&m.body, &mut scope);
        if m.ret != Type::Void && !block_returns(&m.body) {
            self.error(
                StaticErrorKind::MissingReturn,
                m.span,
                format!("method `{}` does not return a value on every path", m.name),
            );
        }
    }

    fn check_block(&mut self, block: &'p [Stmt], scope: &mut Scope<'p>) {
        let mark = scope.locals.len();
        for s in block {
            self.check_stmt(s, scope);
        }
        scope.locals.truncate(mark);
    }

    fn check_stmt(&mut self, s: &'p Stmt, scope: &mut Scope<'p>) {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let tt = self.expr(target, scope);
                let vt = self.expr(value, scope);
                if let ExprKind::Var(_) | ExprKind::Field { .. } = target.kind {
                } else {
                    self.error(StaticErrorKind::TypeError, target.span, "invalid assignment target");
                }
                if let (Some(tt), Some(vt)) = (tt, vt) {
                    self.expect_assignable(&vt, &tt, value.span);
                }
            }
            StmtKind::Expr(e) => {
                self.expr(e, scope);
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                self.expect_bool(cond, scope);
                self.check_block(then_branch, scope);
                self.check_block(else_branch, scope);
            }
            StmtKind::While { cond, body } => {
                self.expect_bool(cond, scope);
                self.check_block(body, scope);
            }
            StmtKind::Return(value) => {
                let ret = scope.method.ret.clone();
                match value {
                    None if ret != Type::Void => {
                        self.error(StaticErrorKind::TypeError, s.span, format!("missing return value of type `{ret}`"));
                    }
                    None => {}
                    Some(e) => {
                        let t = self.expr(e, scope);
                        if ret == Type::Void {
                            self.error(StaticErrorKind::TypeError, e.span, "cannot return a value from a void method");
                        } else if let Some(t) = t {
                            self.expect_assignable(&t, &ret, e.span);
                        }
                    }
                }
            }
            StmtKind::Local { ty, name, init } => {
                self.check_type_exists(ty, s.span);
                let t = self.expr(init, scope);
                if let Some(t) = t {
                    self.expect_assignable(&t, ty, init.span);
                }
                if scope.lookup(name).is_some() {
                    self.error(StaticErrorKind::DuplicateError, s.span, format!("`{name}` is already defined"));
                }
                scope.locals.push((name.clone(), ty.clone()));
            }
            StmtKind::Skip => {}
        }
    }

    fn expect_bool(&mut self, e: &'p Expr, scope: &mut Scope<'p>) {
        if let Some(t) = self.expr(e, scope) {
            if t != Type::Bool {
                self.error(StaticErrorKind::TypeError, e.span, format!("expected `bool`, found `{t}`"));
            }
        }
    }

    fn expect_assignable(&mut self, from: &Type, to: &Type, span: Span) {
        if !assignable(from, to) {
            self.error(StaticErrorKind::TypeError, span, format!("expected `{to}`, found `{from}`"));
        }
    }

    /// Returns `None` after reporting an error, so callers do not cascade.
    fn expr(&mut self, e: &'p Expr, scope: &mut Scope<'p>) -> Option<Type> {
        let t = self.expr_inner(e, scope)?;
        self.types.types.insert(e.id, t.clone());
        Some(t)
    }

    fn expr_inner(&mut self, e: &'p Expr, scope: &mut Scope<'p>) -> Option<Type> {
        match &e.kind {
            ExprKind::Int(_) => Some(Type::Int),
            ExprKind::Bool(_) => Some(Type::Bool),
            ExprKind::Null => Some(Type::Null),
            ExprKind::This => Some(Type::Class(scope.class.name.clone())),
            ExprKind::Var(name) => {
                if let Some(t) = scope.lookup(name) {
                    return Some(t.clone());
                }
                if let Some(f) = scope.class.field(name) {
                    return Some(f.ty.clone());
                }
                self.error(StaticErrorKind::NameError, e.span, format!("unknown name `{name}`"));
                None
            }
            ExprKind::Field { receiver, name } => {
                let rt = self.expr(receiver, scope)?;
                let class = self.class_of(&rt, receiver.span)?;
                let Some(field) = class.field(name) else {
                    self.error(StaticErrorKind::NameError, e.span, format!("class `{}` has no field `{name}`", class.name));
                    return None;
                };
                if field.visibility == Visibility::Hidden && class.name != scope.class.name {
                    self.error(
                        StaticErrorKind::VisibilityError,
                        e.span,
                        format!("field `{}.{name}` is hidden", class.name),
                    );
                }
                Some(field.ty.clone())
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let lt = self.expr(lhs, scope);
                let rt = self.expr(rhs, scope);
                let (lt, rt) = (lt?, rt?);
                match op {
                    _ if op.is_arithmetic() => {
                        self.expect_operands(*op, &lt, &rt, &Type::Int, e.span)?;
                        Some(Type::Int)
                    }
                    BinOp::Eq | BinOp::Ne => {
                        let ok = lt == rt
                            || (lt.is_ref() && rt.is_ref() && (lt == Type::Null || rt == Type::Null));
                        if !ok || lt == Type::Void {
                            self.error(
                                StaticErrorKind::TypeError,
                                e.span,
                                format!("cannot compare `{lt}` with `{rt}`"),
                            );
                            return None;
                        }
                        Some(Type::Bool)
                    }
                    _ if op.is_relational() => {
                        self.expect_operands(*op, &lt, &rt, &Type::Int, e.span)?;
                        Some(Type::Bool)
                    }
                    _ => {
                        self.expect_operands(*op, &lt, &rt, &Type::Bool, e.span)?;
                        Some(Type::Bool)
                    }
                }
            }
            ExprKind::Unary { op, operand } => {
                let t = self.expr(operand, scope)?;
                let want = match op {
                    UnOp::Not => Type::Bool,
                    UnOp::Neg => Type::Int,
                };
                if t != want {
                    self.error(
                        StaticErrorKind::TypeError,
                        e.span,
                        format!("operator `{}` expects `{want}`, found `{t}`", op.symbol()),
                    );
                    return None;
                }
                Some(want)
            }
            ExprKind::Call { receiver, method, args } => {
                let class = match receiver {
                    Some(r) => {
                        let rt = self.expr(r, scope)?;
                        self.class_of(&rt, r.span)?
                    }
                    None => scope.class,
                };
                let arg_types: Vec<Option<Type>> = args.iter().map(|a| self.expr(a, scope)).collect();
                let Some(m) = class.method(method) else {
                    self.error(StaticErrorKind::NameError, e.span, format!("class `{}` has no method `{method}`", class.name));
                    return None;
                };
                if m.visibility == Visibility::Hidden && class.name != scope.class.name {
                    self.error(
                        StaticErrorKind::VisibilityError,
                        e.span,
                        format!("method `{}.{method}` is hidden", class.name),
                    );
                }
                self.check_args(&m.params, args, &arg_types, e.span, method);
                Some(m.ret.clone())
            }
            ExprKind::New { class, args } => {
                let arg_types: Vec<Option<Type>> = args.iter().map(|a| self.expr(a, scope)).collect();
                let Some(decl) = self.class(class) else {
                    self.error(StaticErrorKind::NameError, e.span, format!("unknown class `{class}`"));
                    return None;
                };
                let ctor = &decl.constructor;
                if ctor.visibility == Visibility::Hidden && decl.name != scope.class.name {
                    self.error(
                        StaticErrorKind::VisibilityError,
                        e.span,
                        format!("constructor of `{class}` is hidden"),
                    );
                }
                self.check_args(&ctor.params, args, &arg_types, e.span, class);
                Some(Type::Class(class.clone()))
            }
        }
    }

    fn check_args(&mut self, params: &[Param], args: &[Expr], arg_types: &[Option<Type>], span: Span, callee: &str) {
        if params.len() != args.len() {
            self.error(
                StaticErrorKind::TypeError,
                span,
                format!("`{callee}` expects {} argument(s), found {}", params.len(), args.len()),
            );
            return;
        }
        for ((p, a), t) in params.iter().zip(args).zip(arg_types) {
            if let Some(t) = t {
                self.expect_assignable(t, &p.ty, a.span);
            }
        }
    }

    fn expect_operands(&mut self, op: BinOp, lt: &Type, rt: &Type, want: &Type, span: Span) -> Option<()> {
        if lt != want || rt != want {
            self.error(
                StaticErrorKind::TypeError,
                span,
                format!("operator `{op}` expects `{want}` operands, found `{lt}` and `{rt}`"),
            );
            return None;
        }
        Some(())
    }

    fn class_of(&mut self, t: &Type, span: Span) -> Option<&'p ClassDecl> {
        match t {
            Type::Class(name) => self.class(name).or_else(|| {
                self.error(StaticErrorKind::NameError, span, format!("unknown class `{name}`"));
                None
            }),
            other => {
                self.error(StaticErrorKind::TypeError, span, format!("`{other}` has no members"));
                None
            }
        }
    }
}

fn assignable(from: &Type, to: &Type) -> bool {
    from == to || (*from == Type::Null && matches!(to, Type::Class(_)))
}

/// A block returns on all paths if it contains a `return`, or an `if` whose
/// branches both return. Loops never count, so mutating a loop condition
/// cannot invalidate the check.
pub fn block_returns(block: &[Stmt]) -> bool {
    block.iter().any(|s| match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If { then_branch, else_branch, .. } => {
            block_returns(then_branch) && block_returns(else_branch)
        }
        _ => false,
    })
}
