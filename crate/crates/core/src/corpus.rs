//! The shipped example programs, knowledge bases and golden scores.

use std::collections::BTreeMap;
use std::fmt;

use serde::Deserialize;

use crate::kb::{load_kb_str, SchemaKnowledgeBase};
use crate::scoring::{cognitive_load, format_symbolic, parse_symbolic, round2, EPolynomial};
use crate::{analyze, Score};

pub const LOW_KB: &str = include_str!("../../../data/low_literacy.kb");
pub const HIGH_KB: &str = include_str!("../../../data/high_literacy.kb");

const PROGRAMS: [(&str, &str, &str); 5] = [
    (
        "revenue_task1",
        include_str!("../../../data/corpus/revenue_task1.alg"),
        include_str!("../../../data/corpus/golden/revenue_task1.json"),
    ),
    (
        "revenue_task2",
        include_str!("../../../data/corpus/revenue_task2.alg"),
        include_str!("../../../data/corpus/golden/revenue_task2.json"),
    ),
    (
        "revenue_task3",
        include_str!("../../../data/corpus/revenue_task3.alg"),
        include_str!("../../../data/corpus/golden/revenue_task3.json"),
    ),
    ("uib", include_str!("../../../data/corpus/uib.alg"), include_str!("../../../data/corpus/golden/uib.json")),
    ("uuknn", include_str!("../../../data/corpus/uuknn.alg"), include_str!("../../../data/corpus/golden/uuknn.json")),
];

pub fn low_kb() -> SchemaKnowledgeBase {
    load_kb_str(LOW_KB).expect("shipped low_literacy.kb is valid")
}

pub fn high_kb() -> SchemaKnowledgeBase {
    load_kb_str(HIGH_KB).expect("shipped high_literacy.kb is valid")
}

pub fn shipped_kbs() -> [SchemaKnowledgeBase; 2] {
    [low_kb(), high_kb()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenScore {
    pub symbolic: EPolynomial,
    pub numeric: Score,
}

#[derive(Deserialize)]
struct GoldenFile {
    program: String,
    description: String,
    scores: BTreeMap<String, GoldenText>,
}

#[derive(Deserialize)]
struct GoldenText {
    symbolic: String,
    numeric: Score,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub description: String,
    pub source: &'static str,
    /// Keyed by KB name.
    pub golden: BTreeMap<String, GoldenScore>,
}

pub fn entries() -> Vec<CorpusEntry> {
    PROGRAMS
        .iter()
        .map(|&(name, source, golden)| {
            let file: GoldenFile = serde_json::from_str(golden).expect("golden file parses");
            assert_eq!(file.program, name);
            let golden = file
                .scores
                .into_iter()
                .map(|(kb, g)| {
                    let symbolic = parse_symbolic(&g.symbolic).expect("golden symbolic score parses");
                    (kb, GoldenScore { symbolic, numeric: g.numeric })
                })
                .collect();
            CorpusEntry { name, description: file.description, source, golden }
        })
        .collect()
}

pub fn entry(name: &str) -> Option<CorpusEntry> {
    entries().into_iter().find(|e| e.name == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub program: String,
    pub kb: String,
    pub expected: EPolynomial,
    pub actual: Option<EPolynomial>,
    /// Why the entry failed, naming the first node whose load disagrees.
    pub failure: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => write!(f, "ok   {} / {}: {}", self.program, self.kb, self.expected),
            Some(why) => write!(f, "FAIL {} / {}: expected {}; {why}", self.program, self.kb, self.expected),
        }
    }
}

/// Scores every corpus entry under every shipped KB against its golden value.
pub fn run_corpus() -> Vec<Outcome> {
    let kbs = shipped_kbs();
    let mut out = Vec::new();
    for e in entries() {
        for kb in &kbs {
            let Some(golden) = e.golden.get(&kb.name) else { continue };
            let expected = golden.symbolic.clone();
            let outcome = match analyze(e.source, kb) {
                Err(err) => Outcome {
                    program: e.name.into(),
                    kb: kb.name.clone(),
                    expected,
                    actual: None,
                    failure: Some(format!("{} failed: {err}", err.stage())),
                },
                Ok(a) => {
                    let failure = if a.score != expected {
                        Some(divergence(&a.ocg, &a.score, &expected))
                    } else {
                        let numeric = round2(a.value().unwrap_or(Score::NAN));
                        ((numeric - golden.numeric).abs() > 0.005)
                            .then(|| format!("numeric {numeric} differs from golden {}", golden.numeric))
                    };
                    Outcome { program: e.name.into(), kb: kb.name.clone(), expected, actual: Some(a.score), failure }
                }
            };
            out.push(outcome);
        }
    }
    out
}

fn divergence(graph: &crate::OperationGraph, actual: &EPolynomial, expected: &EPolynomial) -> String {
    let mut exps: Vec<u32> = actual.terms().chain(expected.terms()).map(|(e, _)| e).collect();
    exps.sort_unstable_by(|a, b| b.cmp(a));
    let Some(&load) = exps.iter().find(|&&e| actual.coefficient(e) != expected.coefficient(e)) else {
        return "scores agree".into();
    };
    let got = format!("got {}", format_symbolic(actual));
    if actual.coefficient(load) > expected.coefficient(load) {
        let node = graph.nodes.keys().filter_map(|&id| cognitive_load(graph, id).ok()).find(|s| s.load == load);
        match node {
            Some(s) => format!(
                "{got}; first divergent node {} `{}` has C={} P={} CL={}",
                s.node,
                graph.nodes[&s.node].description,
                s.context,
                s.parents,
                s.load
            ),
            None => got,
        }
    } else {
        format!("{got}; missing a node with CL={load}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_data_loads() {
        assert_eq!(entries().len(), 5);
        assert_eq!(entries().iter().map(|e| e.golden.len()).sum::<usize>(), 10);
        assert!(!low_kb().contains("dot_product"));
        assert!(high_kb().contains("dot_product") && high_kb().contains("l2_norm"));
    }

    #[test]
    fn every_entry_matches_its_golden_score() {
        for o in run_corpus() {
            assert!(o.passed(), "{o}");
        }
    }
}
