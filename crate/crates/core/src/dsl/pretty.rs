//! Canonical source rendering. `parse(tokenize(pretty(ast)))` reproduces `ast`
//! up to positions.

use std::fmt::Write;

use super::ast::*;

pub fn pretty(ast: &Ast) -> String {
    let mut out = String::new();
    let groups: [(DeclKind, &str); 4] = [
        (DeclKind::Scalar, "input scalar"),
        (DeclKind::Vector, "input vector"),
        (DeclKind::Collection, "collection"),
        (DeclKind::Subset, "subset"),
    ];
    // One line per declaration keeps declaration order intact.
    for decl in &ast.declarations {
        let kw = groups.iter().find(|(k, _)| *k == decl.kind).map(|(_, kw)| *kw).unwrap_or("input scalar");
        match decl.size {
            Some(n) => writeln!(out, "{kw} {}[{n}]", decl.name),
            None => writeln!(out, "{kw} {}", decl.name),
        }
        .ok();
    }
    if !ast.declarations.is_empty() {
        out.push('\n');
    }
    for stmt in &ast.statements {
        write_stmt(&mut out, stmt, 0);
    }
    if !ast.outputs.is_empty() {
        let names: Vec<&str> = ast.outputs.iter().map(|o| o.name.as_str()).collect();
        let _ = writeln!(out, "output {}", names.join(", "));
    }
    out
}

pub fn pretty_statements(stmts: &[Statement]) -> String {
    let mut out = String::new();
    for s in stmts {
        write_stmt(&mut out, s, 0);
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

pub fn target_text(t: &Target) -> String {
    if t.indices.is_empty() {
        t.name.clone()
    } else {
        format!("{}[{}]", t.name, t.indices.join(", "))
    }
}

pub fn filters_text(filters: &[Comparison]) -> String {
    filters.iter().map(comparison_text).collect::<Vec<_>>().join(" and ")
}

fn write_block(out: &mut String, body: &[Statement], depth: usize) {
    out.push_str("{\n");
    for s in body {
        write_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn write_stmt(out: &mut String, stmt: &Statement, depth: usize) {
    indent(out, depth);
    match stmt {
        Statement::Assign { target, value, .. } => {
            let rhs = match value {
                Expr::Compare(c) => comparison_text(c),
                other => expr_text(other),
            };
            let _ = writeln!(out, "{} = {}", target_text(target), rhs);
        }
        Statement::Accumulate { target, reducer, var, collection, filters, body, .. } => {
            let _ = write!(out, "{} = {} over {var} in {collection}", target_text(target), reducer.op_name());
            if !filters.is_empty() {
                let _ = write!(out, " where {}", filters_text(filters));
            }
            let body: Vec<String> = body.iter().map(expr_text).collect();
            let _ = writeln!(out, " of {}", body.join(", "));
        }
        Statement::ForEach { var, collection, filters, body, .. } => {
            let _ = write!(out, "for {var} in {collection} ");
            if !filters.is_empty() {
                let _ = write!(out, "where {} ", filters_text(filters));
            }
            write_block(out, body, depth);
            out.push('\n');
        }
        Statement::If { condition, then_body, else_body, .. } => {
            let _ = write!(out, "if {} ", filters_text(condition));
            write_block(out, then_body, depth);
            if !else_body.is_empty() {
                out.push_str(" else ");
                write_block(out, else_body, depth);
            }
            out.push('\n');
        }
    }
}

pub fn comparison_text(c: &Comparison) -> String {
    format!("{} {} {}", expr_text(&c.lhs), c.op.symbol(), expr_text(&c.rhs))
}

pub fn expr_text(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match e {
        Expr::Number(n, _) => {
            let _ = write!(out, "{n}");
        }
        Expr::Var(name, _) => out.push_str(name),
        Expr::Index { name, indices, .. } => {
            out.push_str(name);
            out.push('[');
            write_list(out, indices);
            out.push(']');
        }
        Expr::Call { name, args, .. } => {
            out.push_str(name);
            out.push('(');
            write_list(out, args);
            out.push(')');
        }
        Expr::Neg(inner, _) => {
            out.push('-');
            write_expr(out, inner, 3);
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let prec = op.precedence();
            let paren = prec < min_prec;
            if paren {
                out.push('(');
            }
            write_expr(out, lhs, prec);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, rhs, prec + 1);
            if paren {
                out.push(')');
            }
        }
        Expr::Compare(c) => {
            out.push('(');
            out.push_str(&comparison_text(c));
            out.push(')');
        }
    }
}

fn write_list(out: &mut String, items: &[Expr]) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, item, 0);
    }
}
