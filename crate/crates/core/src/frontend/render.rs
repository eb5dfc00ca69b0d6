//! Canonical pretty-printer. `parse(render(p)) == p` for every parsed program.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "  ";

pub fn render(p: &Program) -> String {
    let mut out = String::new();
    for (i, class) in p.classes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        render_class(class, &mut out);
    }
    out
}

pub fn render_class(class: &ClassDecl, out: &mut String) {
    let _ = writeln!(out, "class {} {{", class.name);
    for f in &class.fields {
        let _ = writeln!(out, "{INDENT}{} {} {};", f.visibility.as_str(), f.ty, f.name);
    }
    render_method(&class.constructor, 1, out);
    for m in &class.methods {
        render_method(m, 1, out);
    }
    out.push_str("}\n");
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str(INDENT);
    }
}

fn render_method(m: &MethodDecl, level: usize, out: &mut String) {
    indent(level, out);
    if m.is_constructor {
        if m.visibility == Visibility::Hidden {
            out.push_str("hidden ");
        }
        out.push_str(&m.name);
    } else {
        let _ = write!(out, "{} {} {}", m.visibility.as_str(), m.ret, m.name);
    }
    out.push('(');
    for (i, p) in m.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{} {}", p.ty, p.name);
    }
    out.push_str(") ");
    render_block(&m.body, level, out);
    out.push('\n');
}

/// Writes `{ ... }` starting at the current column; the closing brace is
/// indented to `level` and not followed by a newline.
fn render_block(block: &[Stmt], level: usize, out: &mut String) {
    if block.is_empty() {
        out.push_str("{ }");
        return;
    }
    out.push_str("{\n");
    for s in block {
        render_stmt(s, level + 1, out);
    }
    indent(level, out);
    out.push('}');
}

pub fn render_stmt(s: &Stmt, level: usize, out: &mut String) {
    indent(level, out);
    match &s.kind {
        StmtKind::Assign { target, value } => {
            let _ = write!(out, "{} = {};", render_expr(target), render_expr(value));
        }
        StmtKind::Expr(e) => {
            let _ = write!(out, "{};", render_expr(e));
        }
        StmtKind::If { cond, then_branch, else_branch } => {
            let _ = write!(out, "if ({}) ", render_expr(cond));
            render_block(then_branch, level, out);
            if !else_branch.is_empty() {
                out.push_str(" else ");
                render_block(else_branch, level, out);
            }
        }
        StmtKind::While { cond, body } => {
            let _ = write!(out, "while ({}) ", render_expr(cond));
            render_block(body, level, out);
        }
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Return(Some(e)) => {
            let _ = write!(out, "return {};", render_expr(e));
        }
        StmtKind::Local { ty, name, init } => {
            let _ = write!(out, "{ty} {name} = {};", render_expr(init));
        }
        StmtKind::Skip => out.push_str("skip;"),
    }
    out.push('\n');
}

const UNARY_PREC: u8 = 7;
const ATOM_PREC: u8 = 8;

fn prec_of(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Unary { .. } => UNARY_PREC,
        // A negative literal is lexically a prefix minus.
        ExprKind::Int(v) if *v < 0 => UNARY_PREC,
        _ => ATOM_PREC,
    }
}

pub fn render_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

fn write_wrapped(e: &Expr, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

fn write_args(args: &[Expr], out: &mut String) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(a, out);
    }
    out.push(')');
}

fn write_expr(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Int(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Null => out.push_str("null"),
        ExprKind::This => out.push_str("this"),
        ExprKind::Var(name) => out.push_str(name),
        ExprKind::Field { receiver, name } => {
            write_wrapped(receiver, prec_of(receiver) < ATOM_PREC, out);
            out.push('.');
            out.push_str(name);
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            write_wrapped(lhs, prec_of(lhs) < p, out);
            let _ = write!(out, " {} ", op.symbol());
            write_wrapped(rhs, prec_of(rhs) <= p, out);
        }
        ExprKind::Unary { op, operand } => {
            out.push_str(op.symbol());
            // `-5` would re-parse as a literal, so negated literals keep parens.
            let wrap = prec_of(operand) < UNARY_PREC
                || (*op == UnOp::Neg && matches!(operand.kind, ExprKind::Int(_)));
            write_wrapped(operand, wrap, out);
        }
        ExprKind::Call { receiver, method, args } => {
            if let Some(r) = receiver {
                write_wrapped(r, prec_of(r) < ATOM_PREC, out);
                out.push('.');
            }
            out.push_str(method);
            write_args(args, out);
        }
        ExprKind::New { class, args } => {
            let _ = write!(out, "new {class}");
            write_args(args, out);
        }
    }
}
