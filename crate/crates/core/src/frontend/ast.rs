//! Typed syntax tree for MiniOO compilation units.
//!
//! Every node carries a [`NodeId`] and a [`Span`]. Equality on nodes is
//! *structural*: ids and spans are ignored, so a program compares equal to the
//! result of re-parsing its rendering.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Identity of a syntax node. Assigned in pre-order by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Source location: 1-based line and column plus length in bytes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl Span {
    pub fn new(line: u32, col: u32, len: u32) -> Self {
        Span { line, col, len }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Hidden,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::Hidden => "hidden",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Bool,
    Void,
    /// Reference to an instance of the named class (may be null).
    Class(String),
    /// Type of the `null` literal; assignable to any class type.
    Null,
}

impl Type {
    pub fn is_ref(&self) -> bool {
        matches!(self, Type::Class(_) | Type::Null)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Bool => f.write_str("bool"),
            Type::Void => f.write_str("void"),
            Type::Class(name) => f.write_str(name),
            Type::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Program {
    /// Corpus-relative path of the source file.
    pub source_id: String,
    pub classes: Vec<ClassDecl>,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Largest node id in the program, or `None` for an empty program.
    pub fn max_node_id(&self) -> Option<NodeId> {
        let mut max = None;
        visit_program(self, &mut |node| {
            let id = node.id();
            if max.is_none_or(|m| id > m) {
                max = Some(id);
            }
        });
        max
    }
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
    }
}

#[derive(Debug, Clone)]
pub struct ClassDecl {
    pub id: NodeId,
    pub span: Span,
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub constructor: MethodDecl,
    pub methods: Vec<MethodDecl>,
}

impl ClassDecl {
    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name == name)
    }

    /// Constructor followed by methods, in declaration order.
    pub fn callables(&self) -> impl Iterator<Item = &MethodDecl> {
        std::iter::once(&self.constructor).chain(self.methods.iter())
    }
}

impl PartialEq for ClassDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.fields == other.fields
            && self.constructor == other.constructor
            && self.methods == other.methods
    }
}

#[derive(Debug, Clone)]
pub struct FieldDecl {
    pub id: NodeId,
    pub span: Span,
    pub name: String,
    pub ty: Type,
    pub visibility: Visibility,
}

impl PartialEq for FieldDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ty == other.ty && self.visibility == other.visibility
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub id: NodeId,
    pub span: Span,
    pub name: String,
    pub ty: Type,
}

impl PartialEq for Param {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ty == other.ty
    }
}

/// A method or constructor. Constructors carry the class name and return `void`.
#[derive(Debug, Clone)]
pub struct MethodDecl {
    pub id: NodeId,
    pub span: Span,
    pub name: String,
    pub visibility: Visibility,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: Vec<Stmt>,
    pub is_constructor: bool,
}

impl PartialEq for MethodDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.visibility == other.visibility
            && self.params == other.params
            && self.ret == other.ret
            && self.body == other.body
            && self.is_constructor == other.is_constructor
    }
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub id: NodeId,
    pub span: Span,
    pub kind: StmtKind,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    /// `target = value;` where target is a variable or field reference.
    Assign { target: Expr, value: Expr },
    Expr(Expr),
    If { cond: Expr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Return(Option<Expr>),
    /// `T name = init;`, a block-scoped local.
    Local { ty: Type, name: String, init: Expr },
    /// `skip;`, the no-op left behind by statement deletion.
    Skip,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub id: NodeId,
    pub span: Span,
    pub kind: ExprKind,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Null,
    This,
    /// Unqualified name: a local/parameter, otherwise a field of `this`.
    Var(String),
    Field { receiver: Box<Expr>, name: String },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: UnOp, operand: Box<Expr> },
    /// Method call; a missing receiver means `this`.
    Call { receiver: Option<Box<Expr>>, method: String, args: Vec<Expr> },
    New { class: String, args: Vec<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub const ARITHMETIC: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem];
    pub const RELATIONAL: [BinOp; 6] =
        [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne];
    pub const LOGICAL: [BinOp; 2] = [BinOp::And, BinOp::Or];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        Self::ARITHMETIC.contains(&self)
    }

    pub fn is_relational(self) -> bool {
        Self::RELATIONAL.contains(&self)
    }

    pub fn is_logical(self) -> bool {
        Self::LOGICAL.contains(&self)
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::Neg => "-",
        }
    }
}

/// Borrowed view of any node, for generic traversals.
#[derive(Clone, Copy)]
pub enum NodeRef<'a> {
    Class(&'a ClassDecl),
    Field(&'a FieldDecl),
    Method(&'a MethodDecl),
    Param(&'a Param),
    Stmt(&'a Stmt),
    Expr(&'a Expr),
}

impl NodeRef<'_> {
    pub fn id(&self) -> NodeId {
        match self {
            NodeRef::Class(n) => n.id,
            NodeRef::Field(n) => n.id,
            NodeRef::Method(n) => n.id,
            NodeRef::Param(n) => n.id,
            NodeRef::Stmt(n) => n.id,
            NodeRef::Expr(n) => n.id,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            NodeRef::Class(n) => n.span,
            NodeRef::Field(n) => n.span,
            NodeRef::Method(n) => n.span,
            NodeRef::Param(n) => n.span,
            NodeRef::Stmt(n) => n.span,
            NodeRef::Expr(n) => n.span,
        }
    }
}

/// Visits every node in canonical pre-order: class, fields, constructor,
/// methods; within a method its parameters then body.
pub fn visit_program<'a>(p: &'a Program, f: &mut dyn FnMut(NodeRef<'a>)) {
    for class in &p.classes {
        visit_class(class, f);
    }
}

pub fn visit_class<'a>(class: &'a ClassDecl, f: &mut dyn FnMut(NodeRef<'a>)) {
    f(NodeRef::Class(class));
    for field in &class.fields {
        f(NodeRef::Field(field));
    }
    for method in class.callables() {
        visit_method(method, f);
    }
}

pub fn visit_method<'a>(method: &'a MethodDecl, f: &mut dyn FnMut(NodeRef<'a>)) {
    f(NodeRef::Method(method));
    for param in &method.params {
        f(NodeRef::Param(param));
    }
    visit_block(&method.body, f);
}

pub fn visit_block<'a>(block: &'a [Stmt], f: &mut dyn FnMut(NodeRef<'a>)) {
    for stmt in block {
        visit_stmt(stmt, f);
    }
}

pub fn visit_stmt<'a>(stmt: &'a Stmt, f: &mut dyn FnMut(NodeRef<'a>)) {
    f(NodeRef::Stmt(stmt));
    match &stmt.kind {
        StmtKind::Assign { target, value } => {
            visit_expr(target, f);
            visit_expr(value, f);
        }
        StmtKind::Expr(e) => visit_expr(e, f),
        StmtKind::If { cond, then_branch, else_branch } => {
            visit_expr(cond, f);
            visit_block(then_branch, f);
            visit_block(else_branch, f);
        }
        StmtKind::While { cond, body } => {
            visit_expr(cond, f);
            visit_block(body, f);
        }
        StmtKind::Return(e) => {
            if let Some(e) = e {
                visit_expr(e, f);
            }
        }
        StmtKind::Local { init, .. } => visit_expr(init, f),
        StmtKind::Skip => {}
    }
}

pub fn visit_expr<'a>(expr: &'a Expr, f: &mut dyn FnMut(NodeRef<'a>)) {
    f(NodeRef::Expr(expr));
    match &expr.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Null | ExprKind::This | ExprKind::Var(_) => {}
        ExprKind::Field { receiver, .. } => visit_expr(receiver, f),
        ExprKind::Binary { lhs, rhs, .. } => {
            visit_expr(lhs, f);
            visit_expr(rhs, f);
        }
        ExprKind::Unary { operand, .. } => visit_expr(operand, f),
        ExprKind::Call { receiver, args, .. } => {
            if let Some(r) = receiver {
                visit_expr(r, f);
            }
            for a in args {
                visit_expr(a, f);
            }
        }
        ExprKind::New { args, .. } => {
            for a in args {
                visit_expr(a, f);
            }
        }
    }
}

/// Reassigns ids in canonical pre-order, starting at `*next`.
pub(crate) fn renumber_program(p: &mut Program, next: &mut u32) {
    for class in &mut p.classes {
        renumber_class(class, next);
    }
}

pub(crate) fn renumber_class(class: &mut ClassDecl, next: &mut u32) {
    class.id = fresh(next);
    for field in &mut class.fields {
        field.id = fresh(next);
    }
    renumber_method(&mut class.constructor, next);
    for m in &mut class.methods {
        renumber_method(m, next);
    }
}

pub(crate) fn renumber_method(m: &mut MethodDecl, next: &mut u32) {
    m.id = fresh(next);
    for p in &mut m.params {
        p.id = fresh(next);
    }
    renumber_block(&mut m.body, next);
}

fn renumber_block(block: &mut [Stmt], next: &mut u32) {
    for s in block {
        renumber_stmt(s, next);
    }
}

fn renumber_stmt(s: &mut Stmt, next: &mut u32) {
    s.id = fresh(next);
    match &mut s.kind {
        StmtKind::Assign { target, value } => {
            renumber_expr(target, next);
            renumber_expr(value, next);
        }
        StmtKind::Expr(e) => renumber_expr(e, next),
        StmtKind::If { cond, then_branch, else_branch } => {
            renumber_expr(cond, next);
            renumber_block(then_branch, next);
            renumber_block(else_branch, next);
        }
        StmtKind::While { cond, body } => {
            renumber_expr(cond, next);
            renumber_block(body, next);
        }
        StmtKind::Return(e) => {
            if let Some(e) = e {
                renumber_expr(e, next);
            }
        }
        StmtKind::Local { init, .. } => renumber_expr(init, next),
        StmtKind::Skip => {}
    }
}

fn renumber_expr(e: &mut Expr, next: &mut u32) {
    e.id = fresh(next);
    match &mut e.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Null | ExprKind::This | ExprKind::Var(_) => {}
        ExprKind::Field { receiver, .. } => renumber_expr(receiver, next),
        ExprKind::Binary { lhs, rhs, .. } => {
            renumber_expr(lhs, next);
            renumber_expr(rhs, next);
        }
        ExprKind::Unary { operand, .. } => renumber_expr(operand, next),
        ExprKind::Call { receiver, args, .. } => {
            if let Some(r) = receiver {
                renumber_expr(r, next);
            }
            for a in args {
                renumber_expr(a, next);
            }
        }
        ExprKind::New { args, .. } => {
            for a in args {
                renumber_expr(a, next);
            }
        }
    }
}

fn fresh(next: &mut u32) -> NodeId {
    let id = NodeId(*next);
    *next += 1;
    id
}
