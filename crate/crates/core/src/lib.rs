//! Cognitive load of algorithm descriptions, measured on their control flow
//! and operation graphs against a knowledge base of known schemas.

pub mod abstraction;
pub mod corpus;
pub mod dsl;
pub mod flowgraph;
pub mod kb;
pub mod opgraph;
pub mod propgen;
pub mod report;
pub mod scoring;

use thiserror::Error;

pub use abstraction::{abstract_to_fixpoint, OperationContextGraph};
pub use dsl::{Ast, DslError, SourceProgram};
pub use flowgraph::ControlFlowGraph;
pub use kb::{load_kb, KbError, SchemaKnowledgeBase};
pub use opgraph::OperationGraph;
pub use scoring::{EPolynomial, GrowthFunction};

/// Scalar used for numeric scores.
pub type Score = f64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("control flow is not structured: {}", .0.join("; "))]
    Unstructured(Vec<String>),
    #[error(transparent)]
    Abstraction(#[from] abstraction::AbstractionError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Score(#[from] scoring::ScoreError),
}

impl PipelineError {
    /// Pipeline stage that failed, as named in error reports.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Dsl(DslError::Lex { .. }) => "lex",
            PipelineError::Dsl(DslError::Parse { .. }) => "parse",
            PipelineError::Dsl(DslError::Invalid(_)) => "validate",
            PipelineError::Unstructured(_) => "structure",
            PipelineError::Abstraction(_) => "abstraction",
            PipelineError::Kb(_) => "kb",
            PipelineError::Score(_) => "score",
        }
    }

    pub fn diagnostics(&self) -> Vec<(dsl::Span, String)> {
        match self {
            PipelineError::Dsl(e) => e.diagnostics(),
            PipelineError::Kb(e) => e.diagnostics(),
            other => vec![(dsl::Span::new(1, 1), other.to_string())],
        }
    }
}

/// Every stage of one program measured against one knowledge base.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub ast: Ast,
    pub cfg: ControlFlowGraph,
    pub flat: OperationGraph,
    pub ocg: OperationContextGraph,
    pub score: EPolynomial,
}

impl Analysis {
    pub fn value(&self) -> Result<Score, scoring::ScoreError> {
        scoring::evaluate_exp(&self.score)
    }
}

/// Control flow graph and flattened operation graph of `ast`.
pub fn front_end(ast: &Ast) -> Result<(ControlFlowGraph, OperationGraph), PipelineError> {
    let cfg = flowgraph::build_cfg(ast);
    let structure = flowgraph::verify_structured(&cfg);
    if !structure.structured {
        return Err(PipelineError::Unstructured(structure.diagnostics));
    }
    let flat = opgraph::operation_graph(&cfg);
    Ok((cfg, flat))
}

pub fn analyze_ast(ast: Ast, kb: &SchemaKnowledgeBase) -> Result<Analysis, PipelineError> {
    let mismatched = dsl::check_with_signatures(&ast, &kb.signatures());
    if !mismatched.is_empty() {
        return Err(DslError::Invalid(mismatched).into());
    }
    let (cfg, flat) = front_end(&ast)?;
    abstraction::check_coverage(&flat, kb)?;
    let ocg = abstract_to_fixpoint(&flat, kb);
    let score = scoring::cognitive_complexity(&ocg);
    Ok(Analysis { ast, cfg, flat, ocg, score })
}

/// Parse, validate, build graphs, abstract against `kb` and score.
pub fn analyze(source: &str, kb: &SchemaKnowledgeBase) -> Result<Analysis, PipelineError> {
    analyze_ast(dsl::parse_program(source)?, kb)
}
