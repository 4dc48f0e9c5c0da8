use std::fmt;

/// A 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub const fn new(line: u32, column: u32) -> Self {
        Span { line, column }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Value types of the DSL. `Any` is the result of a named call, whose
/// signature lives in a knowledge base rather than in the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Scalar,
    Vector,
    Collection,
    Any,
}

impl Type {
    pub fn accepts(self, found: Type) -> bool {
        self == found || self == Type::Any || found == Type::Any
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Scalar => "scalar",
            Type::Vector => "vector",
            Type::Collection => "collection",
            Type::Any => "any",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeclKind {
    Scalar,
    Vector,
    /// A collection iterated in full.
    Collection,
    /// A named subset of some larger collection (e.g. the users who rated an item).
    Subset,
}

impl DeclKind {
    pub fn value_type(self) -> Type {
        match self {
            DeclKind::Scalar => Type::Scalar,
            DeclKind::Vector => Type::Vector,
            DeclKind::Collection | DeclKind::Subset => Type::Collection,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declaration {
    pub name: String,
    pub kind: DeclKind,
    /// Declared element count, e.g. `collection items[100]`. Never affects analysis.
    pub size: Option<u64>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputRef {
    pub name: String,
    pub span: Span,
}

/// A parsed program: the algorithm being measured.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ast {
    pub declarations: Vec<Declaration>,
    pub statements: Vec<Statement>,
    pub outputs: Vec<OutputRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub name: String,
    /// Loop variables used to index an element-wise assignment, `d[i] = ...`.
    pub indices: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Reducer {
    Sum,
    Product,
    /// A reduction schema such as `average` or `weighted_average`.
    Named(String),
}

impl Reducer {
    pub fn op_name(&self) -> &str {
        match self {
            Reducer::Sum => "sum",
            Reducer::Product => "product",
            Reducer::Named(name) => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Assign {
        target: Target,
        value: Expr,
        span: Span,
    },
    ForEach {
        var: String,
        collection: String,
        filters: Vec<Comparison>,
        body: Vec<Statement>,
        span: Span,
    },
    Accumulate {
        target: Target,
        reducer: Reducer,
        var: String,
        collection: String,
        filters: Vec<Comparison>,
        body: Vec<Expr>,
        span: Span,
    },
    If {
        condition: Vec<Comparison>,
        then_body: Vec<Statement>,
        else_body: Vec<Statement>,
        span: Span,
    },
}

impl Statement {
    pub fn span(&self) -> Span {
        match self {
            Statement::Assign { span, .. }
            | Statement::ForEach { span, .. }
            | Statement::Accumulate { span, .. }
            | Statement::If { span, .. } => *span,
        }
    }

    /// Number of statements in this subtree, counting `self`.
    pub fn count(&self) -> usize {
        match self {
            Statement::Assign { .. } | Statement::Accumulate { .. } => 1,
            Statement::ForEach { body, .. } => 1 + body.iter().map(Statement::count).sum::<usize>(),
            Statement::If { then_body, else_body, .. } => {
                1 + then_body.iter().chain(else_body).map(Statement::count).sum::<usize>()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn op_name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// One atomic comparison. Guards are conjunctions of these.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64, Span),
    Var(String, Span),
    Index {
        name: String,
        indices: Vec<Expr>,
        span: Span,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
    Neg(Box<Expr>, Span),
    Call {
        name: String,
        args: Vec<Expr>,
        span: Span,
    },
    Compare(Box<Comparison>),
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Number(_, span)
            | Expr::Var(_, span)
            | Expr::Index { span, .. }
            | Expr::Binary { span, .. }
            | Expr::Neg(_, span)
            | Expr::Call { span, .. } => *span,
            Expr::Compare(c) => c.span,
        }
    }
}

impl Ast {
    /// Total statement count, nested statements included.
    pub fn statement_count(&self) -> usize {
        self.statements.iter().map(Statement::count).sum()
    }

    pub fn declaration(&self, name: &str) -> Option<&Declaration> {
        self.declarations.iter().find(|d| d.name == name)
    }

    /// Copy of the tree with every position reset, for structural comparison.
    pub fn strip_spans(&self) -> Ast {
        Ast {
            declarations: self
                .declarations
                .iter()
                .map(|d| Declaration { span: Span::default(), ..d.clone() })
                .collect(),
            statements: self.statements.iter().map(strip_stmt).collect(),
            outputs: self
                .outputs
                .iter()
                .map(|o| OutputRef { name: o.name.clone(), span: Span::default() })
                .collect(),
        }
    }
}

fn strip_target(t: &Target) -> Target {
    Target { span: Span::default(), ..t.clone() }
}

fn strip_cmp(c: &Comparison) -> Comparison {
    Comparison { lhs: strip_expr(&c.lhs), op: c.op, rhs: strip_expr(&c.rhs), span: Span::default() }
}

fn strip_stmt(s: &Statement) -> Statement {
    let z = Span::default();
    match s {
        Statement::Assign { target, value, .. } => {
            Statement::Assign { target: strip_target(target), value: strip_expr(value), span: z }
        }
        Statement::ForEach { var, collection, filters, body, .. } => Statement::ForEach {
            var: var.clone(),
            collection: collection.clone(),
            filters: filters.iter().map(strip_cmp).collect(),
            body: body.iter().map(strip_stmt).collect(),
            span: z,
        },
        Statement::Accumulate { target, reducer, var, collection, filters, body, .. } => Statement::Accumulate {
            target: strip_target(target),
            reducer: reducer.clone(),
            var: var.clone(),
            collection: collection.clone(),
            filters: filters.iter().map(strip_cmp).collect(),
            body: body.iter().map(strip_expr).collect(),
            span: z,
        },
        Statement::If { condition, then_body, else_body, .. } => Statement::If {
            condition: condition.iter().map(strip_cmp).collect(),
            then_body: then_body.iter().map(strip_stmt).collect(),
            else_body: else_body.iter().map(strip_stmt).collect(),
            span: z,
        },
    }
}

fn strip_expr(e: &Expr) -> Expr {
    let z = Span::default();
    match e {
        Expr::Number(n, _) => Expr::Number(*n, z),
        Expr::Var(name, _) => Expr::Var(name.clone(), z),
        Expr::Index { name, indices, .. } => {
            Expr::Index { name: name.clone(), indices: indices.iter().map(strip_expr).collect(), span: z }
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            Expr::Binary { op: *op, lhs: Box::new(strip_expr(lhs)), rhs: Box::new(strip_expr(rhs)), span: z }
        }
        Expr::Neg(inner, _) => Expr::Neg(Box::new(strip_expr(inner)), z),
        Expr::Call { name, args, .. } => {
            Expr::Call { name: name.clone(), args: args.iter().map(strip_expr).collect(), span: z }
        }
        Expr::Compare(c) => Expr::Compare(Box::new(strip_cmp(c))),
    }
}
