//! Rewriting an operation graph to a user's level: every occurrence of a
//! known schema's decomposition collapses into one node named after it.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::kb::{is_builtin, Schema, SchemaKnowledgeBase};
use crate::opgraph::{NodeId, OperationGraph, OperationNode, Producer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbstractionError {
    #[error("match for `{0}` no longer holds in this graph")]
    StaleMatch(String),
    #[error("operation `{op}` is neither built in nor defined in knowledge base `{kb}`")]
    UnknownOperation { op: String, kb: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternNode {
    pub op: String,
    /// Pattern-internal parents, by index.
    pub parents: BTreeSet<usize>,
    /// Reads a placeholder, so the matched node may take outside inputs.
    pub open_inputs: bool,
    /// No other pattern node consumes it.
    pub is_output: bool,
}

/// A schema decomposition in matchable form. Nodes are in topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub schema: String,
    pub level: u32,
    pub nodes: Vec<PatternNode>,
}

impl Pattern {
    pub fn from_schema(schema: &Schema) -> Option<Pattern> {
        let g = schema.pattern()?;
        let order = g.topo_order()?;
        let index = |id: NodeId| order.iter().position(|&o| o == id);
        let nodes = order
            .iter()
            .map(|&id| {
                let n = &g.nodes[&id];
                PatternNode {
                    op: n.op.clone(),
                    parents: n.parents().filter_map(index).collect(),
                    open_inputs: n.inputs.iter().any(|p| matches!(p, Producer::Source(_))),
                    is_output: g.consumers(id).is_empty(),
                }
            })
            .collect();
        Some(Pattern { schema: schema.name.clone(), level: schema.level, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Patterns of every decomposable schema, highest level first, then by name.
pub fn compile_patterns(kb: &SchemaKnowledgeBase) -> Vec<Pattern> {
    let mut patterns: Vec<Pattern> = kb.schemas().iter().filter_map(Pattern::from_schema).collect();
    patterns.sort_by(|a, b| b.level.cmp(&a.level).then_with(|| a.schema.cmp(&b.schema)));
    patterns
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternMatch {
    pub pattern: Pattern,
    /// Graph node for each pattern node.
    pub embedding: Vec<NodeId>,
    /// Producers outside the match feeding it.
    pub producers: Vec<Producer>,
    /// Nodes outside the match reading from it.
    pub consumers: BTreeSet<NodeId>,
}

/// Checks the full match definition for a complete embedding.
pub fn is_valid_embedding(graph: &OperationGraph, pattern: &Pattern, embedding: &[NodeId]) -> bool {
    if embedding.len() != pattern.len() || embedding.iter().collect::<BTreeSet<_>>().len() != embedding.len() {
        return false;
    }
    let Some(nodes) = embedding.iter().map(|id| graph.node(*id)).collect::<Option<Vec<_>>>() else {
        return false;
    };
    let matched: BTreeSet<NodeId> = embedding.iter().copied().collect();
    let contexts = &nodes[0].contexts;
    for (i, (p, n)) in pattern.nodes.iter().zip(&nodes).enumerate() {
        if p.op != n.op || &n.contexts != contexts {
            return false;
        }
        let internal: BTreeSet<usize> = n
            .parents()
            .filter_map(|id| embedding.iter().position(|&e| e == id))
            .collect();
        if internal != p.parents {
            return false;
        }
        if !p.open_inputs && n.inputs.iter().any(|inp| !matches!(inp, Producer::Node(id) if matched.contains(id))) {
            return false;
        }
        if !p.is_output && (graph.is_output(embedding[i]) || !graph.consumers(embedding[i]).is_subset(&matched)) {
            return false;
        }
    }
    true
}

fn complete(graph: &OperationGraph, pattern: &Pattern, embedding: Vec<NodeId>) -> PatternMatch {
    let matched: BTreeSet<NodeId> = embedding.iter().copied().collect();
    let mut producers = Vec::new();
    let mut consumers = BTreeSet::new();
    for id in &embedding {
        for p in &graph.nodes[id].inputs {
            let internal = matches!(p, Producer::Node(n) if matched.contains(n));
            if !internal && !producers.contains(p) {
                producers.push(p.clone());
            }
        }
        consumers.extend(graph.consumers(*id).into_iter().filter(|c| !matched.contains(c)));
    }
    PatternMatch { pattern: pattern.clone(), embedding, producers, consumers }
}

/// All embeddings of `pattern` in `graph`, ordered by smallest matched id
/// and then by the embedding itself. Symmetric patterns yield one match per
/// automorphism.
pub fn find_matches(graph: &OperationGraph, pattern: &Pattern) -> Vec<PatternMatch> {
    fn extend(
        graph: &OperationGraph,
        pattern: &Pattern,
        partial: &mut Vec<NodeId>,
        found: &mut Vec<Vec<NodeId>>,
    ) {
        let i = partial.len();
        if i == pattern.len() {
            if is_valid_embedding(graph, pattern, partial) {
                found.push(partial.clone());
            }
            return;
        }
        let p = &pattern.nodes[i];
        let candidates: Vec<NodeId> = match p.parents.iter().next() {
            Some(&q) => graph.consumers(partial[q]).into_iter().collect(),
            None => graph.nodes.keys().copied().collect(),
        };
        for c in candidates {
            let n = &graph.nodes[&c];
            if n.op != p.op || partial.contains(&c) {
                continue;
            }
            if i > 0 && graph.nodes[&partial[0]].contexts != n.contexts {
                continue;
            }
            // Edges to already placed nodes must agree with the pattern.
            let parents = graph.parents(c);
            let consistent = (0..i).all(|j| parents.contains(&partial[j]) == p.parents.contains(&j))
                && (0..i).all(|j| !graph.parents(partial[j]).contains(&c) || pattern.nodes[j].parents.contains(&i));
            if !consistent {
                continue;
            }
            partial.push(c);
            extend(graph, pattern, partial, found);
            partial.pop();
        }
    }
    if pattern.is_empty() {
        return Vec::new();
    }
    let mut found = Vec::new();
    extend(graph, pattern, &mut Vec::new(), &mut found);
    found.sort_by_key(|e| (*e.iter().min().unwrap(), e.clone()));
    found.into_iter().map(|e| complete(graph, pattern, e)).collect()
}

fn common_prefix<T: PartialEq + Clone>(lists: &[&[T]]) -> Vec<T> {
    let Some(first) = lists.first() else { return Vec::new() };
    let len = (0..first.len()).take_while(|&k| lists.iter().all(|l| l.get(k) == first.get(k))).count();
    first[..len].to_vec()
}

/// Replaces the matched nodes by one node named after the schema.
pub fn apply_match(graph: &OperationGraph, m: &PatternMatch) -> Result<OperationGraph, AbstractionError> {
    if !is_valid_embedding(graph, &m.pattern, &m.embedding) || complete(graph, &m.pattern, m.embedding.clone()) != *m {
        return Err(AbstractionError::StaleMatch(m.pattern.schema.clone()));
    }
    let mut g = graph.clone();
    let matched: Vec<&OperationNode> = m.embedding.iter().map(|id| &graph.nodes[id]).collect();
    let outputs: Vec<&str> = m
        .pattern
        .nodes
        .iter()
        .zip(&matched)
        .filter(|(p, _)| p.is_output)
        .map(|(_, n)| n.description.as_str())
        .collect();
    let scopes: Vec<&[usize]> = matched.iter().map(|n| n.scope.as_slice()).collect();
    let id = g.fresh_id();
    let merged = OperationNode {
        id,
        op: m.pattern.schema.clone(),
        contexts: matched[0].contexts.clone(),
        inputs: m.producers.clone(),
        description: format!("{} ({})", m.pattern.schema, outputs.join("; ")),
        scope: common_prefix(&scopes),
    };
    let rewire = |inputs: &mut Vec<Producer>| {
        let mut out: Vec<Producer> = Vec::with_capacity(inputs.len());
        for p in inputs.drain(..) {
            let p = match p {
                Producer::Node(n) if m.embedding.contains(&n) => Producer::Node(id),
                other => other,
            };
            if !out.contains(&p) {
                out.push(p);
            }
        }
        *inputs = out;
    };
    for n in &m.embedding {
        g.remove(*n);
    }
    for c in &m.consumers {
        if let Some(node) = g.nodes.get_mut(c) {
            rewire(&mut node.inputs);
        }
    }
    for (_, ps) in g.outputs.iter_mut() {
        rewire(ps);
    }
    g.insert(merged);
    Ok(g)
}

/// Every operation must be built in or known to the KB.
pub fn check_coverage(graph: &OperationGraph, kb: &SchemaKnowledgeBase) -> Result<(), AbstractionError> {
    match graph.iter().find(|n| !is_builtin(&n.op) && !kb.contains(&n.op)) {
        Some(n) => Err(AbstractionError::UnknownOperation { op: n.op.clone(), kb: kb.name.clone() }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewrite {
    pub schema: String,
    pub nodes_before: usize,
    pub nodes_after: usize,
}

/// The operation graph at a user group's level.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationContextGraph {
    pub graph: OperationGraph,
    pub kb_name: String,
    pub rewrites: Vec<Rewrite>,
}

impl std::ops::Deref for OperationContextGraph {
    type Target = OperationGraph;
    fn deref(&self) -> &OperationGraph {
        &self.graph
    }
}

/// Applies the highest-level matching schema (ties by name, then first
/// match in canonical order) until nothing matches.
pub fn abstract_to_fixpoint(graph: &OperationGraph, kb: &SchemaKnowledgeBase) -> OperationContextGraph {
    let patterns = compile_patterns(kb);
    let mut g = graph.canonicalize();
    let mut rewrites = Vec::new();
    'rewrite: loop {
        for p in &patterns {
            if let Some(m) = find_matches(&g, p).into_iter().next() {
                let next = apply_match(&g, &m).expect("fresh match applies");
                rewrites.push(Rewrite { schema: p.schema.clone(), nodes_before: g.len(), nodes_after: next.len() });
                g = next.canonicalize();
                continue 'rewrite;
            }
        }
        break;
    }
    OperationContextGraph { graph: g, kb_name: kb.name.clone(), rewrites }
}
