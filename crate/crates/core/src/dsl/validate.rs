//! Semantic checks: definition before use, the three-type discipline, call arity.

use std::collections::HashMap;
use std::fmt;

use super::ast::*;
use super::{primitive_arity, DslError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    UndeclaredVariable(String),
    TypeMismatch { expected: Type, found: Type },
    ArityMismatch { name: String, expected: usize, found: usize },
    Redefinition(String),
    InvalidReducer(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Span,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.span)?;
        match &self.kind {
            DiagnosticKind::UndeclaredVariable(name) => write!(f, "undeclared variable `{name}`"),
            DiagnosticKind::TypeMismatch { expected, found } => {
                write!(f, "type mismatch: expected {expected}, found {found}")
            }
            DiagnosticKind::ArityMismatch { name, expected, found } => {
                write!(f, "`{name}` takes {expected} argument(s), found {found}")
            }
            DiagnosticKind::Redefinition(name) => write!(f, "`{name}` is already defined"),
            DiagnosticKind::InvalidReducer(name) => write!(f, "`{name}` cannot be used as a reduction"),
        }
    }
}

/// Checks `ast`, returning it unchanged when it is well formed.
pub fn validate(ast: Ast) -> Result<Ast, DslError> {
    let diagnostics = check(&ast);
    if diagnostics.is_empty() {
        Ok(ast)
    } else {
        Err(DslError::Invalid(diagnostics))
    }
}

/// All diagnostics for `ast`, in source order.
pub fn check(ast: &Ast) -> Vec<Diagnostic> {
    check_with_signatures(ast, &HashMap::new())
}

/// Like [`check`], with named operations held to known parameter counts.
/// A named reduction counts its collection as the first parameter.
pub fn check_with_signatures(ast: &Ast, signatures: &HashMap<String, usize>) -> Vec<Diagnostic> {
    let mut v = Validator { call_arity: signatures.clone(), ..Validator::default() };
    for decl in &ast.declarations {
        if v.env.contains_key(&decl.name) {
            v.report(decl.span, DiagnosticKind::Redefinition(decl.name.clone()));
        } else {
            v.env.insert(decl.name.clone(), Binding { ty: decl.kind.value_type(), input: true });
        }
    }
    v.statements(&ast.statements);
    for out in &ast.outputs {
        if !v.env.contains_key(&out.name) {
            v.report(out.span, DiagnosticKind::UndeclaredVariable(out.name.clone()));
        }
    }
    v.diagnostics.sort_by_key(|d| d.span);
    v.diagnostics
}

#[derive(Debug, Clone, Copy)]
struct Binding {
    ty: Type,
    input: bool,
}

#[derive(Default)]
struct Validator {
    env: HashMap<String, Binding>,
    loop_vars: Vec<String>,
    call_arity: HashMap<String, usize>,
    diagnostics: Vec<Diagnostic>,
}

impl Validator {
    fn report(&mut self, span: Span, kind: DiagnosticKind) {
        self.diagnostics.push(Diagnostic { span, kind });
    }

    fn is_loop_var(&self, name: &str) -> bool {
        self.loop_vars.iter().any(|v| v == name)
    }

    fn statements(&mut self, stmts: &[Statement]) {
        for s in stmts {
            self.statement(s);
        }
    }

    fn statement(&mut self, stmt: &Statement) {
        match stmt {
            Statement::Assign { target, value, .. } => {
                let ty = self.expr(value);
                self.define(target, ty);
            }
            Statement::ForEach { var, collection, filters, body, span } => {
                self.enter_loop(var, collection, *span);
                self.conditions(filters);
                self.statements(body);
                self.loop_vars.pop();
            }
            Statement::Accumulate { target, reducer, var, collection, filters, body, span } => {
                self.enter_loop(var, collection, *span);
                self.conditions(filters);
                let types: Vec<Type> = body.iter().map(|e| self.expr(e)).collect();
                let result = match reducer {
                    Reducer::Sum | Reducer::Product => {
                        if body.len() != 1 {
                            self.report(
                                *span,
                                DiagnosticKind::ArityMismatch {
                                    name: reducer.op_name().to_string(),
                                    expected: 1,
                                    found: body.len(),
                                },
                            );
                        }
                        for (e, ty) in body.iter().zip(&types) {
                            self.expect(e.span(), Type::Scalar, *ty);
                        }
                        Type::Scalar
                    }
                    Reducer::Named(name) => {
                        if primitive_arity(name).is_some() {
                            self.report(*span, DiagnosticKind::InvalidReducer(name.clone()));
                        }
                        self.check_named_arity(name, body.len() + 1, *span);
                        Type::Any
                    }
                };
                self.loop_vars.pop();
                self.define(target, result);
            }
            Statement::If { condition, then_body, else_body, .. } => {
                self.conditions(condition);
                self.statements(then_body);
                self.statements(else_body);
            }
        }
    }

    fn enter_loop(&mut self, var: &str, collection: &str, span: Span) {
        match self.lookup(collection) {
            Some(ty) => self.expect(span, Type::Collection, ty),
            None => self.report(span, DiagnosticKind::UndeclaredVariable(collection.to_string())),
        }
        if self.env.contains_key(var) || self.is_loop_var(var) {
            self.report(span, DiagnosticKind::Redefinition(var.to_string()));
        }
        self.loop_vars.push(var.to_string());
    }

    fn conditions(&mut self, conds: &[Comparison]) {
        for c in conds {
            let l = self.expr(&c.lhs);
            self.expect(c.lhs.span(), Type::Scalar, l);
            let r = self.expr(&c.rhs);
            self.expect(c.rhs.span(), Type::Scalar, r);
        }
    }

    fn define(&mut self, target: &Target, value_ty: Type) {
        for idx in &target.indices {
            if !self.is_loop_var(idx) {
                self.report(target.span, DiagnosticKind::UndeclaredVariable(idx.clone()));
            }
        }
        let ty = if target.indices.is_empty() {
            value_ty
        } else {
            self.expect(target.span, Type::Scalar, value_ty);
            Type::Vector
        };
        if self.is_loop_var(&target.name) {
            self.report(target.span, DiagnosticKind::Redefinition(target.name.clone()));
            return;
        }
        match self.env.get(&target.name).copied() {
            Some(Binding { input: true, .. }) => {
                self.report(target.span, DiagnosticKind::Redefinition(target.name.clone()));
            }
            Some(Binding { ty: prev, .. }) if !prev.accepts(ty) => {
                self.report(target.span, DiagnosticKind::TypeMismatch { expected: prev, found: ty });
            }
            _ => {
                self.env.insert(target.name.clone(), Binding { ty, input: false });
            }
        }
    }

    fn lookup(&self, name: &str) -> Option<Type> {
        if self.is_loop_var(name) {
            return Some(Type::Scalar);
        }
        self.env.get(name).map(|b| b.ty)
    }

    fn expect(&mut self, span: Span, expected: Type, found: Type) {
        if !expected.accepts(found) {
            self.report(span, DiagnosticKind::TypeMismatch { expected, found });
        }
    }

    fn check_named_arity(&mut self, name: &str, found: usize, span: Span) {
        match self.call_arity.get(name) {
            Some(&expected) if expected != found => {
                self.report(span, DiagnosticKind::ArityMismatch { name: name.to_string(), expected, found })
            }
            Some(_) => {}
            None => {
                self.call_arity.insert(name.to_string(), found);
            }
        }
    }

    fn expr(&mut self, e: &Expr) -> Type {
        match e {
            Expr::Number(..) => Type::Scalar,
            Expr::Var(name, span) => match self.lookup(name) {
                Some(ty) => ty,
                None => {
                    self.report(*span, DiagnosticKind::UndeclaredVariable(name.clone()));
                    Type::Any
                }
            },
            Expr::Index { name, indices, span } => {
                match self.lookup(name) {
                    Some(ty) => self.expect(*span, Type::Vector, ty),
                    None => self.report(*span, DiagnosticKind::UndeclaredVariable(name.clone())),
                }
                for idx in indices {
                    let ty = self.expr(idx);
                    self.expect(idx.span(), Type::Scalar, ty);
                }
                Type::Scalar
            }
            Expr::Binary { lhs, rhs, .. } => {
                for side in [lhs, rhs] {
                    let ty = self.expr(side);
                    self.expect(side.span(), Type::Scalar, ty);
                }
                Type::Scalar
            }
            Expr::Neg(inner, _) => {
                let ty = self.expr(inner);
                self.expect(inner.span(), Type::Scalar, ty);
                Type::Scalar
            }
            Expr::Compare(c) => {
                self.conditions(std::slice::from_ref(c.as_ref()));
                Type::Scalar
            }
            Expr::Call { name, args, span } => {
                let types: Vec<Type> = args.iter().map(|a| self.expr(a)).collect();
                if let Some(arity) = primitive_arity(name) {
                    if arity != args.len() {
                        self.report(
                            *span,
                            DiagnosticKind::ArityMismatch { name: name.clone(), expected: arity, found: args.len() },
                        );
                    }
                    for (a, ty) in args.iter().zip(types) {
                        self.expect(a.span(), Type::Scalar, ty);
                    }
                    Type::Scalar
                } else if name == "sum" || name == "product" {
                    if args.is_empty() {
                        self.report(*span, DiagnosticKind::ArityMismatch { name: name.clone(), expected: 1, found: 0 });
                    }
                    for (a, ty) in args.iter().zip(types) {
                        self.expect(a.span(), Type::Scalar, ty);
                    }
                    Type::Scalar
                } else {
                    self.check_named_arity(name, args.len(), *span);
                    Type::Any
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, tokenize};

    fn diags(src: &str) -> Vec<Diagnostic> {
        check(&parse(&tokenize(src).unwrap()).unwrap())
    }

    #[test]
    fn undeclared_variable() {
        let d = diags("input scalar a\nx = a + z");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::UndeclaredVariable("z".into()));
        assert_eq!(d[0].span, Span::new(2, 9));
    }

    #[test]
    fn vector_where_scalar_expected() {
        let d = diags("input vector v\ninput scalar a\nx = v + a");
        assert!(matches!(
            d[0].kind,
            DiagnosticKind::TypeMismatch { expected: Type::Scalar, found: Type::Vector }
        ));
    }

    #[test]
    fn primitive_arity_is_enforced() {
        let d = diags("input scalar a, b\nx = sqrt(a, b)");
        assert!(matches!(&d[0].kind, DiagnosticKind::ArityMismatch { expected: 1, found: 2, .. }));
    }

    #[test]
    fn named_calls_must_agree_on_arity() {
        let d = diags("input scalar a, b\nx = f(a)\ny = f(a, b)");
        assert!(matches!(&d[0].kind, DiagnosticKind::ArityMismatch { expected: 1, found: 2, .. }));
    }

    #[test]
    fn signatures_fix_named_arity() {
        let ast = parse(&tokenize("input scalar a\ncollection C\nx = g(a)\ny = avg over i in C of a").unwrap()).unwrap();
        let sigs: HashMap<String, usize> = [("g".to_string(), 3), ("avg".to_string(), 2)].into();
        let d = check_with_signatures(&ast, &sigs);
        assert_eq!(d.len(), 1);
        assert!(matches!(&d[0].kind, DiagnosticKind::ArityMismatch { expected: 3, found: 1, .. }));
    }

    #[test]
    fn loop_variables_are_scoped() {
        let d = diags("input vector v\ncollection C\nfor i in C { d[i] = v[i] }\ny = v[i]");
        assert_eq!(d, vec![Diagnostic { span: Span::new(4, 7), kind: DiagnosticKind::UndeclaredVariable("i".into()) }]);
    }

    #[test]
    fn inputs_cannot_be_assigned() {
        let d = diags("input scalar a\na = 1");
        assert_eq!(d[0].kind, DiagnosticKind::Redefinition("a".into()));
    }

    #[test]
    fn iteration_requires_a_collection() {
        let d = diags("input scalar a\nx = sum over i in a of 1");
        assert!(matches!(d[0].kind, DiagnosticKind::TypeMismatch { expected: Type::Collection, .. }));
    }

    #[test]
    fn clean_program_passes() {
        let src = "input vector price, qty\ncollection items\n\
                   revenue = sum over i in items where price[i] > 10 of price[i] * qty[i]\noutput revenue";
        assert!(diags(src).is_empty());
    }
}
