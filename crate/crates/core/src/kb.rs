//! Schema knowledge bases: what a user group already knows as single units.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::dsl::{
    check_with_signatures, pretty_statements, tokenize, Ast, DeclKind, Declaration, DslError, Span, Statement, Token, TokenKind, Type,
    PRIMITIVES,
};
use crate::flowgraph::build_cfg;
use crate::opgraph::{flatten, OperationGraph};

/// Operations the DSL itself provides: the primitives plus the two reducers.
pub fn is_builtin(op: &str) -> bool {
    op == "sum" || op == "product" || PRIMITIVES.iter().any(|(n, _)| *n == op)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub ty: Type,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub name: String,
    pub params: Vec<Param>,
    pub output: Type,
    /// Level written in the file; advisory only.
    pub declared_level: Option<u32>,
    pub level: u32,
    pub decomposition: Option<Vec<Statement>>,
    pub span: Span,
}

impl Schema {
    pub fn atomic(name: &str, params: Vec<Param>, output: Type) -> Schema {
        Schema { name: name.into(), params, output, declared_level: None, level: 0, decomposition: None, span: Span::default() }
    }

    pub fn signature(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
        format!("{}({}) -> {}", self.name, params.join(", "), self.output)
    }

    /// The decomposition as a program whose inputs are the parameters.
    pub fn fragment(&self) -> Option<Ast> {
        let statements = self.decomposition.clone()?;
        let declarations = self
            .params
            .iter()
            .map(|p| Declaration {
                name: p.name.clone(),
                kind: match p.ty {
                    Type::Vector => DeclKind::Vector,
                    Type::Collection => DeclKind::Collection,
                    _ => DeclKind::Scalar,
                },
                size: None,
                span: self.span,
            })
            .collect();
        Some(Ast { declarations, statements, outputs: Vec::new() })
    }

    /// Flattened decomposition, the pattern searched for during abstraction.
    pub fn pattern(&self) -> Option<OperationGraph> {
        self.fragment().map(|ast| flatten(&build_cfg(&ast)))
    }

    fn decomposition_text(&self) -> Option<String> {
        self.decomposition.as_deref().map(pretty_statements)
    }

    /// One `schema` block in `.kb` syntax.
    pub fn to_text(&self) -> String {
        let mut out = format!("schema {}", self.signature());
        if let Some(text) = self.decomposition_text() {
            out.push_str(&format!(" level {} decomposes {{\n", self.level));
            for line in text.lines() {
                out.push_str("  ");
                out.push_str(line);
                out.push('\n');
            }
            out.push('}');
        }
        out.push('\n');
        out
    }

    /// Same signature and same decomposition.
    pub fn same_definition(&self, other: &Schema) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.output == other.output
            && self.decomposition_text() == other.decomposition_text()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SchemaKnowledgeBase {
    pub name: String,
    /// Sorted by name.
    schemas: Vec<Schema>,
}

impl SchemaKnowledgeBase {
    pub fn new(name: impl Into<String>, mut schemas: Vec<Schema>) -> Self {
        schemas.sort_by(|a, b| a.name.cmp(&b.name));
        SchemaKnowledgeBase { name: name.into(), schemas }
    }

    pub fn schemas(&self) -> &[Schema] {
        &self.schemas
    }

    pub fn get(&self, name: &str) -> Option<&Schema> {
        self.schemas.iter().find(|s| s.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Adds `schema`, keeping names sorted. Returns false on a name clash.
    pub fn insert(&mut self, schema: Schema) -> bool {
        if self.contains(&schema.name) {
            return false;
        }
        let at = self.schemas.partition_point(|s| s.name < schema.name);
        self.schemas.insert(at, schema);
        true
    }

    /// Parameter counts of the non-builtin schemas.
    pub fn signatures(&self) -> HashMap<String, usize> {
        self.schemas.iter().filter(|s| !is_builtin(&s.name)).map(|s| (s.name.clone(), s.params.len())).collect()
    }

    pub fn level_of(&self, op: &str) -> u32 {
        self.get(op).map_or(0, |s| s.level)
    }

    /// Renders the KB in `.kb` syntax.
    pub fn to_text(&self) -> String {
        let mut out = format!("[kb {}]\n\n", self.name);
        for s in &self.schemas {
            out.push_str(&s.to_text());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KbDiagnosticKind {
    DuplicateSchema(String),
    PrimitiveWithDecomposition(String),
    UnknownReference { schema: String, name: String },
    CyclicDecomposition(Vec<String>),
    InvalidDecomposition { schema: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbDiagnostic {
    pub span: Span,
    pub kind: KbDiagnosticKind,
}

impl fmt::Display for KbDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.span)?;
        match &self.kind {
            KbDiagnosticKind::DuplicateSchema(n) => write!(f, "schema `{n}` is defined more than once"),
            KbDiagnosticKind::PrimitiveWithDecomposition(n) => write!(f, "primitive `{n}` cannot have a decomposition"),
            KbDiagnosticKind::UnknownReference { schema, name } => {
                write!(f, "`{schema}` refers to unknown operation `{name}`")
            }
            KbDiagnosticKind::CyclicDecomposition(path) => write!(f, "cyclic decomposition: {}", path.join(" -> ")),
            KbDiagnosticKind::InvalidDecomposition { schema, message } => {
                write!(f, "invalid decomposition of `{schema}`: {message}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KbError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{span}: {message}")]
    Parse { span: Span, message: String },
    #[error("cyclic decomposition: {}", .0.join(" -> "))]
    CyclicDecomposition(Vec<String>),
    #[error("`{schema}` refers to unknown operation `{name}`")]
    UnknownReference { schema: String, name: String },
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<KbDiagnostic>),
}

impl KbError {
    pub fn diagnostics(&self) -> Vec<(Span, String)> {
        match self {
            KbError::Parse { span, message } => vec![(*span, message.clone())],
            KbError::Invalid(ds) => ds.iter().map(|d| (d.span, d.to_string())).collect(),
            other => vec![(Span::new(1, 1), other.to_string())],
        }
    }
}

impl From<DslError> for KbError {
    fn from(e: DslError) -> Self {
        match e {
            DslError::Lex { span, message } => KbError::Parse { span, message },
            DslError::Parse { span, expected, found } => {
                KbError::Parse { span, message: format!("expected {}, found {found}", expected.join(" or ")) }
            }
            DslError::Invalid(ds) => {
                let span = ds.first().map_or(Span::new(1, 1), |d| d.span);
                KbError::Parse { span, message: ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ") }
            }
        }
    }
}

struct KbParser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> KbParser<'t> {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        self.tokens.get(self.pos).or(self.tokens.last()).map_or(Span::new(1, 1), |t| t.span)
    }

    fn fail<T>(&self, expected: &str) -> Result<T, KbError> {
        let found = self.peek().map_or("end of input".to_string(), TokenKind::describe);
        Err(KbError::Parse { span: self.span(), message: format!("expected {expected}, found {found}") })
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), KbError> {
        if self.peek() == Some(&kind) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(&format!("`{kind}`"))
        }
    }

    fn word(&mut self) -> Result<String, KbError> {
        let name = match self.peek() {
            Some(TokenKind::Ident(n)) => n.clone(),
            Some(TokenKind::Sum) => "sum".into(),
            Some(TokenKind::Product) => "product".into(),
            _ => return self.fail("a name"),
        };
        self.pos += 1;
        Ok(name)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), KbError> {
        match self.peek() {
            Some(TokenKind::Ident(n)) if n == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(&format!("`{kw}`")),
        }
    }

    fn at_word(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Ident(n)) if n == kw)
    }

    fn ty(&mut self) -> Result<Type, KbError> {
        let ty = match self.peek() {
            Some(TokenKind::Scalar) => Type::Scalar,
            Some(TokenKind::Vector) => Type::Vector,
            Some(TokenKind::Collection) => Type::Collection,
            _ => return self.fail("`scalar`, `vector` or `collection`"),
        };
        self.pos += 1;
        Ok(ty)
    }

    fn schema(&mut self) -> Result<Schema, KbError> {
        let span = self.span();
        self.keyword("schema")?;
        let name = self.word()?;
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if self.peek() != Some(&TokenKind::RParen) {
            loop {
                let ty = self.ty()?;
                let pname = self.word()?;
                params.push(Param { ty, name: pname });
                if self.peek() != Some(&TokenKind::Comma) {
                    break;
                }
                self.pos += 1;
            }
        }
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::Arrow)?;
        let output = self.ty()?;
        let mut declared_level = None;
        if self.at_word("level") {
            self.pos += 1;
            match self.peek() {
                Some(TokenKind::Number(n)) if *n >= 0.0 && n.fract() == 0.0 => {
                    declared_level = Some(*n as u32);
                    self.pos += 1;
                }
                _ => return self.fail("a non-negative integer level"),
            }
        }
        let mut decomposition = None;
        if self.at_word("decomposes") {
            self.pos += 1;
            self.expect(TokenKind::LBrace)?;
            let start = self.pos;
            let mut depth = 1;
            while depth > 0 {
                match self.peek() {
                    Some(TokenKind::LBrace) => depth += 1,
                    Some(TokenKind::RBrace) => depth -= 1,
                    None => return self.fail("`}`"),
                    _ => {}
                }
                self.pos += 1;
            }
            let body = &self.tokens[start..self.pos - 1];
            if body.is_empty() {
                return Err(KbError::Parse { span: self.span(), message: "empty decomposition".into() });
            }
            decomposition = Some(crate::dsl::parse_statements(body)?);
        }
        Ok(Schema { name, params, output, declared_level, level: declared_level.unwrap_or(0), decomposition, span })
    }
}

/// Parses `.kb` text without checking the KB invariants.
pub fn parse_kb(text: &str) -> Result<SchemaKnowledgeBase, KbError> {
    let tokens = tokenize(text)?;
    let mut p = KbParser { tokens: &tokens, pos: 0 };
    p.expect(TokenKind::LBracket)?;
    p.keyword("kb")?;
    let name = p.word()?;
    p.expect(TokenKind::RBracket)?;
    // Keep file order here so duplicates can still be reported.
    let mut schemas = Vec::new();
    while p.peek().is_some() {
        schemas.push(p.schema()?);
    }
    Ok(SchemaKnowledgeBase { name, schemas })
}

fn ops_used(schema: &Schema) -> BTreeSet<String> {
    schema.pattern().map(|g| g.iter().map(|n| n.op.clone()).collect()).unwrap_or_default()
}

fn weakly_connected(g: &OperationGraph) -> bool {
    let ids: Vec<_> = g.nodes.keys().copied().collect();
    let Some(&first) = ids.first() else { return true };
    let mut seen = BTreeSet::from([first]);
    let mut stack = vec![first];
    while let Some(id) = stack.pop() {
        for next in g.parents(id).into_iter().chain(g.consumers(id)) {
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    seen.len() == ids.len()
}

/// Checks the KB invariants. Empty iff the KB is well formed.
pub fn validate_kb(kb: &SchemaKnowledgeBase) -> Vec<KbDiagnostic> {
    let mut diags = Vec::new();
    let mut seen = BTreeSet::new();
    for s in &kb.schemas {
        if !seen.insert(s.name.as_str()) {
            diags.push(KbDiagnostic { span: s.span, kind: KbDiagnosticKind::DuplicateSchema(s.name.clone()) });
        }
    }
    let known = |op: &str| is_builtin(op) || kb.schemas.iter().any(|s| s.name == op);
    for s in &kb.schemas {
        let Some(fragment) = s.fragment() else { continue };
        if is_builtin(&s.name) {
            diags.push(KbDiagnostic { span: s.span, kind: KbDiagnosticKind::PrimitiveWithDecomposition(s.name.clone()) });
            continue;
        }
        let invalid = |message: String| KbDiagnostic {
            span: s.span,
            kind: KbDiagnosticKind::InvalidDecomposition { schema: s.name.clone(), message },
        };
        let problems = check_with_signatures(&fragment, &kb.signatures());
        if !problems.is_empty() {
            diags.extend(problems.iter().map(|d| invalid(d.to_string())));
            continue;
        }
        if has_guard(&fragment.statements) {
            diags.push(invalid("guards are not allowed in a decomposition".into()));
        }
        let pattern = s.pattern().unwrap_or_default();
        if pattern.len() < 2 {
            diags.push(invalid(format!("needs at least two operations, found {}", pattern.len())));
        } else if !weakly_connected(&pattern) {
            diags.push(invalid("operations are not connected".into()));
        }
        for op in ops_used(s) {
            if !known(&op) {
                diags.push(KbDiagnostic {
                    span: s.span,
                    kind: KbDiagnosticKind::UnknownReference { schema: s.name.clone(), name: op },
                });
            }
        }
    }
    if let Some(cycle) = find_cycle(kb) {
        let span = kb.schemas.iter().find(|s| s.name == cycle[0]).map_or(Span::default(), |s| s.span);
        diags.push(KbDiagnostic { span, kind: KbDiagnosticKind::CyclicDecomposition(cycle) });
    }
    diags
}

fn has_guard(stmts: &[Statement]) -> bool {
    stmts.iter().any(|s| match s {
        Statement::If { .. } => true,
        Statement::ForEach { filters, body, .. } => !filters.is_empty() || has_guard(body),
        Statement::Accumulate { filters, .. } => !filters.is_empty(),
        Statement::Assign { .. } => false,
    })
}

fn reference_graph(kb: &SchemaKnowledgeBase) -> BTreeMap<String, BTreeSet<String>> {
    kb.schemas
        .iter()
        .map(|s| (s.name.clone(), ops_used(s).into_iter().filter(|op| kb.contains(op)).collect()))
        .collect()
}

fn find_cycle(kb: &SchemaKnowledgeBase) -> Option<Vec<String>> {
    fn visit(
        n: &str,
        g: &BTreeMap<String, BTreeSet<String>>,
        state: &mut BTreeMap<String, u8>,
        path: &mut Vec<String>,
    ) -> Option<Vec<String>> {
        match state.get(n) {
            Some(2) => return None,
            Some(1) => {
                let start = path.iter().position(|p| p == n).unwrap_or(0);
                let mut cycle = path[start..].to_vec();
                cycle.push(n.to_string());
                return Some(cycle);
            }
            _ => {}
        }
        state.insert(n.to_string(), 1);
        path.push(n.to_string());
        for m in g.get(n).into_iter().flatten() {
            if let Some(c) = visit(m, g, state, path) {
                return Some(c);
            }
        }
        path.pop();
        state.insert(n.to_string(), 2);
        None
    }
    let g = reference_graph(kb);
    let mut state = BTreeMap::new();
    for n in g.keys() {
        if let Some(c) = visit(n, &g, &mut state, &mut Vec::new()) {
            return Some(c);
        }
    }
    None
}

/// Levels from the decompositions: 0 when atomic, otherwise one more than
/// the highest level among the operations used. Requires an acyclic KB.
pub fn recompute_levels(kb: &SchemaKnowledgeBase) -> SchemaKnowledgeBase {
    fn level(name: &str, kb: &SchemaKnowledgeBase, memo: &mut BTreeMap<String, u32>, depth: usize) -> u32 {
        if let Some(&l) = memo.get(name) {
            return l;
        }
        let Some(s) = kb.schemas.iter().find(|s| s.name == name) else { return 0 };
        if s.decomposition.is_none() || depth > kb.schemas.len() {
            return 0;
        }
        let l = 1 + ops_used(s).iter().map(|op| level(op, kb, memo, depth + 1)).max().unwrap_or(0);
        memo.insert(name.to_string(), l);
        l
    }
    let mut memo = BTreeMap::new();
    let schemas = kb
        .schemas
        .iter()
        .map(|s| Schema { level: level(&s.name, kb, &mut memo, 0), ..s.clone() })
        .collect();
    SchemaKnowledgeBase::new(kb.name.clone(), schemas)
}

/// Parses, validates and recomputes levels.
pub fn load_kb_str(text: &str) -> Result<SchemaKnowledgeBase, KbError> {
    let kb = parse_kb(text)?;
    let diags = validate_kb(&kb);
    if diags.is_empty() {
        return Ok(recompute_levels(&kb));
    }
    for d in &diags {
        if let KbDiagnosticKind::CyclicDecomposition(c) = &d.kind {
            return Err(KbError::CyclicDecomposition(c.clone()));
        }
    }
    for d in &diags {
        if let KbDiagnosticKind::UnknownReference { schema, name } = &d.kind {
            return Err(KbError::UnknownReference { schema: schema.clone(), name: name.clone() });
        }
    }
    Err(KbError::Invalid(diags))
}

pub fn load_kb(path: &Path) -> Result<SchemaKnowledgeBase, KbError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| KbError::Io { path: path.display().to_string(), message: e.to_string() })?;
    load_kb_str(&text)
}

/// Every schema of `a` appears in `b` with the same signature and decomposition.
pub fn kb_subset(a: &SchemaKnowledgeBase, b: &SchemaKnowledgeBase) -> bool {
    a.schemas.iter().all(|s| b.get(&s.name).is_some_and(|t| s.same_definition(t)))
}
