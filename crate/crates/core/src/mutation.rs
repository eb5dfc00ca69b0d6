//! Mutant catalog generation (AOR, ROR, COR, LVR, STD) and materialization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::ast::*;
use crate::frontend::check::{check_program_typed, TypeTable};
use crate::frontend::render::render_expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MutantId(pub u32);

impl fmt::Display for MutantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operator {
    /// Arithmetic operator replacement.
    AOR,
    /// Relational operator replacement.
    ROR,
    /// Conditional operator replacement.
    COR,
    /// Literal value replacement.
    LVR,
    /// Statement deletion.
    STD,
}

impl Operator {
    pub const ALL: [Operator; 5] = [Operator::AOR, Operator::ROR, Operator::COR, Operator::LVR, Operator::STD];
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// What the mutated node becomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Payload {
    /// Replace the binary operator.
    Op(BinOp),
    /// Replace a binary expression by its left operand.
    Left,
    /// Replace a binary expression by its right operand.
    Right,
    /// Replace a condition by a constant.
    Const(bool),
    Int(i64),
    Bool(bool),
    /// Replace the statement by `skip;`.
    Delete,
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Op(op) => f.write_str(op.symbol()),
            Payload::Left => f.write_str("left"),
            Payload::Right => f.write_str("right"),
            Payload::Const(b) | Payload::Bool(b) => write!(f, "{b}"),
            Payload::Int(v) => write!(f, "{v}"),
            Payload::Delete => f.write_str("DELETE"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutant {
    pub id: MutantId,
    pub node: NodeId,
    pub operator: Operator,
    pub payload: Payload,
    pub owner_class: String,
    /// Enclosing method; constructors use the class name.
    pub method: String,
    pub line: u32,
    /// True iff the node lies in synthesized setter code.
    pub synthetic: bool,
    /// Rendering of the original construct, for reports.
    pub original: String,
}

impl Mutant {
    /// Identity that survives de-encapsulation: the same user-code mutant has
    /// the same key in the original and in the augmented program.
    pub fn alignment_key(&self) -> (String, Operator, String, u32) {
        (self.owner_class.clone(), self.operator, self.payload.to_string(), self.line)
    }
}

/// One row of `mutants.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantRecord {
    pub id: u32,
    pub class: String,
    pub method: String,
    pub line: u32,
    pub op: String,
    pub payload: String,
    pub synthetic: bool,
}

impl From<&Mutant> for MutantRecord {
    fn from(m: &Mutant) -> Self {
        MutantRecord {
            id: m.id.0,
            class: m.owner_class.clone(),
            method: m.method.clone(),
            line: m.line,
            op: m.operator.to_string(),
            payload: m.payload.to_string(),
            synthetic: m.synthetic,
        }
    }
}

/// Mutants ordered by id, with a per-class index. Filtered views keep the
/// original ids, so ids need not be dense.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MutantCatalog {
    mutants: Vec<Mutant>,
    by_class: BTreeMap<String, Vec<MutantId>>,
}

impl MutantCatalog {
    pub fn from_mutants(mut mutants: Vec<Mutant>) -> Self {
        mutants.sort_by_key(|m| m.id);
        let mut by_class: BTreeMap<String, Vec<MutantId>> = BTreeMap::new();
        for m in &mutants {
            by_class.entry(m.owner_class.clone()).or_default().push(m.id);
        }
        MutantCatalog { mutants, by_class }
    }

    pub fn mutants(&self) -> &[Mutant] {
        &self.mutants
    }

    pub fn len(&self) -> usize {
        self.mutants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mutants.is_empty()
    }

    pub fn get(&self, id: MutantId) -> Option<&Mutant> {
        self.mutants.binary_search_by_key(&id, |m| m.id).ok().map(|i| &self.mutants[i])
    }

    pub fn ids(&self) -> Vec<MutantId> {
        self.mutants.iter().map(|m| m.id).collect()
    }

    pub fn id_set(&self) -> BTreeSet<MutantId> {
        self.mutants.iter().map(|m| m.id).collect()
    }

    /// Class name → ids of mutants owned by that class.
    pub fn class_index(&self) -> &BTreeMap<String, Vec<MutantId>> {
        &self.by_class
    }

    pub fn filter(&self, mut keep: impl FnMut(&Mutant) -> bool) -> MutantCatalog {
        MutantCatalog::from_mutants(self.mutants.iter().filter(|m| keep(m)).cloned().collect())
    }

    pub fn for_class(&self, class: &str) -> MutantCatalog {
        self.filter(|m| m.owner_class == class)
    }

    pub fn without_synthetic(&self) -> MutantCatalog {
        self.filter(|m| !m.synthetic)
    }

    pub fn records(&self) -> Vec<MutantRecord> {
        self.mutants.iter().map(MutantRecord::from).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records()).expect("catalog serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("unknown mutant {0}")]
    UnknownMutant(MutantId),
}

/// Builds the catalog for a checked program. Mutants whose node is in
/// `synthetic_regions` are kept but flagged.
pub fn generate_mutants(p: &Program, synthetic_regions: &BTreeSet<NodeId>) -> MutantCatalog {
    let (_, types) = check_program_typed(p);
    let mut gen = Generator { types: &types, synthetic: synthetic_regions, out: Vec::new(), class: "", method: "" };
    for class in &p.classes {
        gen.class = &class.name;
        for m in class.callables() {
            gen.method = &m.name;
            gen.block(&m.body);
        }
    }
    // User-code mutants are numbered first so their ids match the catalog of
    // the program without setters.
    let mut out = gen.out;
    out.sort_by_key(|m| m.synthetic);
    let mutants = out
        .into_iter()
        .enumerate()
        .map(|(i, mut m)| {
            m.id = MutantId(i as u32);
            m
        })
        .collect();
    MutantCatalog::from_mutants(mutants)
}

/// Replacement values for an integer literal, in table order, deduplicated.
pub fn literal_replacements(k: i64) -> Vec<i64> {
    let mut out = Vec::with_capacity(4);
    for v in [k.wrapping_add(1), k.wrapping_sub(1), 0, k.wrapping_neg()] {
        if v != k && !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Payloads for a binary operator site. `int_operands` matters only for
/// `==`/`!=`: ordering replacements are ill-typed on bool and reference
/// operands, so those sites get only the other equality operator and constants.
pub fn binary_replacements(op: BinOp, int_operands: bool) -> (Operator, Vec<Payload>) {
    if op.is_arithmetic() {
        let ps = BinOp::ARITHMETIC.iter().filter(|o| **o != op).map(|o| Payload::Op(*o)).collect();
        (Operator::AOR, ps)
    } else if op.is_relational() {
        let mut ps: Vec<Payload> = if int_operands {
            BinOp::RELATIONAL.iter().filter(|o| **o != op).map(|o| Payload::Op(*o)).collect()
        } else {
            vec![Payload::Op(if op == BinOp::Eq { BinOp::Ne } else { BinOp::Eq })]
        };
        ps.push(Payload::Const(true));
        ps.push(Payload::Const(false));
        (Operator::ROR, ps)
    } else {
        let other = if op == BinOp::And { BinOp::Or } else { BinOp::And };
        (
            Operator::COR,
            vec![Payload::Op(other), Payload::Left, Payload::Right, Payload::Const(true), Payload::Const(false)],
        )
    }
}

struct Generator<'a> {
    types: &'a TypeTable,
    synthetic: &'a BTreeSet<NodeId>,
    out: Vec<Mutant>,
    class: &'a str,
    method: &'a str,
}

impl<'a> Generator<'a> {
    fn push(&mut self, node: NodeId, span: Span, operator: Operator, payload: Payload, original: String) {
        self.out.push(Mutant {
            id: MutantId(0),
            node,
            operator,
            payload,
            owner_class: self.class.to_string(),
            method: self.method.to_string(),
            line: span.line,
            synthetic: self.synthetic.contains(&node),
            original,
        });
    }

    fn block(&mut self, block: &[Stmt]) {
        for s in block {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let text = format!("{} = {};", render_expr(target), render_expr(value));
                self.push(s.id, s.span, Operator::STD, Payload::Delete, text);
                self.expr(target);
                self.expr(value);
            }
            StmtKind::Expr(e) => {
                self.push(s.id, s.span, Operator::STD, Payload::Delete, format!("{};", render_expr(e)));
                self.expr(e);
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                self.expr(cond);
                self.block(then_branch);
                self.block(else_branch);
            }
            StmtKind::While { cond, body } => {
                self.expr(cond);
                self.block(body);
            }
            StmtKind::Return(Some(e)) => self.expr(e),
            StmtKind::Local { init, .. } => self.expr(init),
            StmtKind::Return(None) | StmtKind::Skip => {}
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Int(k) => {
                for v in literal_replacements(*k) {
                    self.push(e.id, e.span, Operator::LVR, Payload::Int(v), k.to_string());
                }
            }
            ExprKind::Bool(b) => {
                self.push(e.id, e.span, Operator::LVR, Payload::Bool(!b), b.to_string());
            }
            ExprKind::Null | ExprKind::This | ExprKind::Var(_) => {}
            ExprKind::Field { receiver, .. } => self.expr(receiver),
            ExprKind::Binary { op, lhs, rhs } => {
                let int_operands = self.types.get(lhs.id) == Some(&Type::Int);
                let (operator, payloads) = binary_replacements(*op, int_operands);
                let text = render_expr(e);
                for p in payloads {
                    self.push(e.id, e.span, operator, p, text.clone());
                }
                self.expr(lhs);
                self.expr(rhs);
            }
            ExprKind::Unary { operand, .. } => self.expr(operand),
            ExprKind::Call { receiver, args, .. } => {
                if let Some(r) = receiver {
                    self.expr(r);
                }
                for a in args {
                    self.expr(a);
                }
            }
            ExprKind::New { args, .. } => {
                for a in args {
                    self.expr(a);
                }
            }
        }
    }
}

/// Returns a copy of `p` with mutant `id` applied. The replaced node keeps its id.
pub fn apply_mutant(p: &Program, catalog: &MutantCatalog, id: MutantId) -> Result<Program, MutationError> {
    let m = catalog.get(id).ok_or(MutationError::UnknownMutant(id))?;
    let mut out = p.clone();
    let mut applied = false;
    for class in &mut out.classes {
        let methods = std::iter::once(&mut class.constructor).chain(class.methods.iter_mut());
        for method in methods {
            if rewrite_block(&mut method.body, m) {
                applied = true;
            }
        }
    }
    if applied {
        Ok(out)
    } else {
        Err(MutationError::UnknownMutant(id))
    }
}

fn rewrite_block(block: &mut [Stmt], m: &Mutant) -> bool {
    block.iter_mut().any(|s| rewrite_stmt(s, m))
}

fn rewrite_stmt(s: &mut Stmt, m: &Mutant) -> bool {
    if s.id == m.node {
        if m.payload == Payload::Delete && matches!(s.kind, StmtKind::Assign { .. } | StmtKind::Expr(_)) {
            s.kind = StmtKind::Skip;
            return true;
        }
        return false;
    }
    match &mut s.kind {
        StmtKind::Assign { target, value } => rewrite_expr(target, m) || rewrite_expr(value, m),
        StmtKind::Expr(e) => rewrite_expr(e, m),
        StmtKind::If { cond, then_branch, else_branch } => {
            rewrite_expr(cond, m) || rewrite_block(then_branch, m) || rewrite_block(else_branch, m)
        }
        StmtKind::While { cond, body } => rewrite_expr(cond, m) || rewrite_block(body, m),
        StmtKind::Return(Some(e)) => rewrite_expr(e, m),
        StmtKind::Local { init, .. } => rewrite_expr(init, m),
        StmtKind::Return(None) | StmtKind::Skip => false,
    }
}

fn rewrite_expr(e: &mut Expr, m: &Mutant) -> bool {
    if e.id == m.node {
        return replace_expr(e, m.payload);
    }
    match &mut e.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Null | ExprKind::This | ExprKind::Var(_) => false,
        ExprKind::Field { receiver, .. } => rewrite_expr(receiver, m),
        ExprKind::Binary { lhs, rhs, .. } => rewrite_expr(lhs, m) || rewrite_expr(rhs, m),
        ExprKind::Unary { operand, .. } => rewrite_expr(operand, m),
        ExprKind::Call { receiver, args, .. } => {
            receiver.as_mut().is_some_and(|r| rewrite_expr(r, m)) || args.iter_mut().any(|a| rewrite_expr(a, m))
        }
        ExprKind::New { args, .. } => args.iter_mut().any(|a| rewrite_expr(a, m)),
    }
}

fn replace_expr(e: &mut Expr, payload: Payload) -> bool {
    let new_kind = match (&mut e.kind, payload) {
        (ExprKind::Binary { op, .. }, Payload::Op(new_op)) => {
            *op = new_op;
            return true;
        }
        (ExprKind::Binary { lhs, .. }, Payload::Left) => lhs.kind.clone(),
        (ExprKind::Binary { rhs, .. }, Payload::Right) => rhs.kind.clone(),
        (ExprKind::Binary { .. }, Payload::Const(b)) => ExprKind::Bool(b),
        (ExprKind::Int(_), Payload::Int(v)) => ExprKind::Int(v),
        (ExprKind::Bool(_), Payload::Bool(b)) => ExprKind::Bool(b),
        _ => return false,
    };
    e.kind = new_kind;
    true
}
