//! Cognitive load per node and cognitive complexity per graph.
//!
//! Scores are kept exactly as integer coefficients over powers of `e`;
//! floating point enters only in [`evaluate`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use serde::Serialize;
use thiserror::Error;

use crate::opgraph::{NodeId, OperationGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("no node {0} in the graph")]
    UnknownNode(NodeId),
    #[error("score is not representable")]
    Overflow,
    #[error("cannot read `{0}` as a score")]
    Malformed(String),
    #[error("unknown growth function `{0}`")]
    UnknownGrowth(String),
}

/// Σ coefficient · e^exponent, with no zero coefficients stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct EPolynomial {
    terms: BTreeMap<u32, u64>,
}

impl EPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(exponent: u32, coefficient: u64) -> Self {
        let mut p = Self::zero();
        p.add_term(exponent, coefficient);
        p
    }

    pub fn add_term(&mut self, exponent: u32, coefficient: u64) {
        if coefficient > 0 {
            *self.terms.entry(exponent).or_insert(0) += coefficient;
        }
    }

    pub fn coefficient(&self, exponent: u32) -> u64 {
        self.terms.get(&exponent).copied().unwrap_or(0)
    }

    /// (exponent, coefficient), highest exponent first.
    pub fn terms(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.terms.iter().rev().map(|(&e, &c)| (e, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of scored nodes.
    pub fn node_count(&self) -> u64 {
        self.terms.values().sum()
    }
}

impl std::ops::Add for &EPolynomial {
    type Output = EPolynomial;
    fn add(self, rhs: &EPolynomial) -> EPolynomial {
        let mut out = self.clone();
        for (e, c) in rhs.terms() {
            out.add_term(e, c);
        }
        out
    }
}

impl FromIterator<u32> for EPolynomial {
    fn from_iter<I: IntoIterator<Item = u32>>(loads: I) -> Self {
        let mut p = EPolynomial::zero();
        for cl in loads {
            p.add_term(cl, 1);
        }
        p
    }
}

pub fn format_symbolic(p: &EPolynomial) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let parts: Vec<String> = p
        .terms()
        .map(|(e, c)| {
            let coeff = if c == 1 && e != 0 { String::new() } else { c.to_string() };
            match e {
                0 => c.to_string(),
                1 => format!("{coeff}e"),
                _ => format!("{coeff}e^{e}"),
            }
        })
        .collect();
    parts.join(" + ")
}

impl fmt::Display for EPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_symbolic(self))
    }
}

pub fn parse_symbolic(text: &str) -> Result<EPolynomial, ScoreError> {
    let bad = || ScoreError::Malformed(text.to_string());
    let text = text.trim();
    if text == "0" {
        return Ok(EPolynomial::zero());
    }
    let mut p = EPolynomial::zero();
    for part in text.split('+') {
        let part = part.trim();
        let (coeff, exp) = match part.find('e') {
            None => (part, "0"),
            Some(at) => {
                let rest = &part[at + 1..];
                let exp = if rest.is_empty() { "1" } else { rest.strip_prefix('^').ok_or_else(bad)? };
                (&part[..at], exp)
            }
        };
        let coeff: u64 = if coeff.is_empty() { 1 } else { coeff.parse().map_err(|_| bad())? };
        let exp: u32 = exp.parse().map_err(|_| bad())?;
        if coeff == 0 {
            return Err(bad());
        }
        p.add_term(exp, coeff);
    }
    Ok(p)
}

impl FromStr for EPolynomial {
    type Err = ScoreError;
    fn from_str(s: &str) -> Result<Self, ScoreError> {
        parse_symbolic(s)
    }
}

/// Weight of a node with a given cognitive load.
pub trait Growth<T: Float> {
    fn weight(&self, load: u32) -> T;
}

impl<T: Float, F: Fn(u32) -> T> Growth<T> for F {
    fn weight(&self, load: u32) -> T {
        self(load)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthFunction {
    /// e^k
    #[default]
    Exp,
    /// 2^k
    Pow2,
    /// k
    Linear,
    /// k²
    Quadratic,
}

impl GrowthFunction {
    pub const ALL: [GrowthFunction; 4] =
        [GrowthFunction::Exp, GrowthFunction::Pow2, GrowthFunction::Linear, GrowthFunction::Quadratic];

    pub fn name(self) -> &'static str {
        match self {
            GrowthFunction::Exp => "exp",
            GrowthFunction::Pow2 => "pow2",
            GrowthFunction::Linear => "linear",
            GrowthFunction::Quadratic => "quadratic",
        }
    }
}

impl FromStr for GrowthFunction {
    type Err = ScoreError;
    fn from_str(s: &str) -> Result<Self, ScoreError> {
        GrowthFunction::ALL.into_iter().find(|g| g.name() == s).ok_or_else(|| ScoreError::UnknownGrowth(s.into()))
    }
}

impl<T: Float> Growth<T> for GrowthFunction {
    fn weight(&self, load: u32) -> T {
        let k = T::from(load).unwrap_or_else(T::infinity);
        match self {
            GrowthFunction::Exp => k.exp(),
            GrowthFunction::Pow2 => k.exp2(),
            GrowthFunction::Linear => k,
            GrowthFunction::Quadratic => k * k,
        }
    }
}

/// Σ coefficient · growth(exponent).
pub fn evaluate<T: Float, G: Growth<T> + ?Sized>(p: &EPolynomial, growth: &G) -> Result<T, ScoreError> {
    let mut total = T::zero();
    for (e, c) in p.terms() {
        let c = T::from(c).ok_or(ScoreError::Overflow)?;
        total = total + c * growth.weight(e);
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(ScoreError::Overflow)
    }
}

/// Value under the default e^k growth.
pub fn evaluate_exp(p: &EPolynomial) -> Result<crate::Score, ScoreError> {
    evaluate(p, &GrowthFunction::Exp)
}

/// Two decimals, the precision used in reports.
pub fn round2<T: Float>(x: T) -> T {
    let hundred = T::from(100).unwrap();
    (x * hundred).round() / hundred
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeScore {
    pub node: NodeId,
    /// Enclosing contexts.
    pub context: u32,
    /// Distinct operation-node parents.
    pub parents: u32,
    pub load: u32,
}

pub fn cognitive_load(graph: &OperationGraph, node: NodeId) -> Result<NodeScore, ScoreError> {
    let n = graph.node(node).ok_or(ScoreError::UnknownNode(node))?;
    let context = n.contexts.len() as u32;
    let parents = graph.parents(node).len() as u32;
    Ok(NodeScore { node, context, parents, load: context + parents + 1 })
}

pub fn node_scores(graph: &OperationGraph) -> Vec<NodeScore> {
    graph.nodes.keys().map(|&id| cognitive_load(graph, id).expect("node is in graph")).collect()
}

pub fn cognitive_complexity(graph: &OperationGraph) -> EPolynomial {
    node_scores(graph).into_iter().map(|s| s.load).collect()
}
