//! Operation graphs: the dataflow over which people reason about an algorithm.
//!
//! Flattening drops loop machinery (headers, back-edges, accumulator
//! initialization) and keeps one node per operation occurrence in the source,
//! whatever the trip count. Guards never become operations; they are
//! recorded as context labels on the nodes they enclose.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dsl::{comparison_text, expr_text, target_text, BinOp, Comparison, DeclKind, Expr};
use crate::flowgraph::{BlockItem, CfgNodeId, CfgNodeKind, ControlFlowGraph, EdgeKind, GuardOrigin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Where an operand comes from: a raw program input, or another operation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Producer {
    Source(String),
    Node(NodeId),
}

pub type ContextId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextOrigin {
    Selection,
    FilteredIteration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextLabel {
    pub id: ContextId,
    /// Identity of the guard: equal keys are the same rectangle.
    pub key: String,
    /// Source text of the atomic condition.
    pub predicate: String,
    pub origin: ContextOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OperationNode {
    pub id: NodeId,
    pub op: String,
    pub contexts: BTreeSet<ContextId>,
    /// Operands in order of first use; duplicates removed.
    pub inputs: Vec<Producer>,
    pub description: String,
    /// Enclosing CFG guards, outermost first.
    #[serde(skip)]
    pub scope: Vec<CfgNodeId>,
}

impl OperationNode {
    /// Distinct operation-node parents. Sources are not parents.
    pub fn parents(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.inputs.iter().filter_map(|p| match p {
            Producer::Node(id) => Some(*id),
            Producer::Source(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct OperationGraph {
    pub nodes: BTreeMap<NodeId, OperationNode>,
    pub contexts: BTreeMap<ContextId, ContextLabel>,
    /// Program results and the producers that reach them.
    pub outputs: Vec<(String, Vec<Producer>)>,
    #[serde(skip)]
    next_id: usize,
}

fn push_unique(list: &mut Vec<Producer>, items: impl IntoIterator<Item = Producer>) {
    for p in items {
        if !list.contains(&p) {
            list.push(p);
        }
    }
}

impl OperationGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&OperationNode> {
        self.nodes.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &OperationNode> {
        self.nodes.values()
    }

    pub fn fresh_id(&mut self) -> NodeId {
        let next = self.nodes.keys().next_back().map_or(0, |id| id.0 + 1).max(self.next_id);
        self.next_id = next + 1;
        NodeId(next)
    }

    pub fn insert(&mut self, node: OperationNode) {
        self.next_id = self.next_id.max(node.id.0 + 1);
        self.nodes.insert(node.id, node);
    }

    pub fn remove(&mut self, id: NodeId) -> Option<OperationNode> {
        self.nodes.remove(&id)
    }

    pub fn parents(&self, id: NodeId) -> BTreeSet<NodeId> {
        self.nodes.get(&id).map(|n| n.parents().collect()).unwrap_or_default()
    }

    pub fn consumers(&self, id: NodeId) -> BTreeSet<NodeId> {
        self.nodes.values().filter(|n| n.inputs.contains(&Producer::Node(id))).map(|n| n.id).collect()
    }

    pub fn is_output(&self, id: NodeId) -> bool {
        self.outputs.iter().any(|(_, ps)| ps.contains(&Producer::Node(id)))
    }

    /// Number of distinct parent links between operation nodes.
    pub fn edge_count(&self) -> usize {
        self.nodes.values().map(|n| n.parents().count()).sum()
    }

    /// Raw inputs referenced anywhere in the graph.
    pub fn sources(&self) -> BTreeSet<String> {
        let from_nodes = self.nodes.values().flat_map(|n| n.inputs.iter());
        let from_outputs = self.outputs.iter().flat_map(|(_, ps)| ps.iter());
        from_nodes
            .chain(from_outputs)
            .filter_map(|p| match p {
                Producer::Source(s) => Some(s.clone()),
                Producer::Node(_) => None,
            })
            .collect()
    }

    /// Context labels actually carried by some node.
    pub fn used_contexts(&self) -> BTreeSet<ContextId> {
        self.nodes.values().flat_map(|n| n.contexts.iter().copied()).collect()
    }

    pub fn context_keys(&self, node: &OperationNode) -> Vec<String> {
        let mut keys: Vec<String> = node.contexts.iter().filter_map(|c| self.contexts.get(c)).map(|l| l.key.clone()).collect();
        keys.sort();
        keys
    }

    /// Kahn topological order, smallest id first among ready nodes.
    /// `None` if the graph has a cycle or a dangling reference.
    pub fn topo_order(&self) -> Option<Vec<NodeId>> {
        let mut indegree: BTreeMap<NodeId, usize> = BTreeMap::new();
        for n in self.nodes.values() {
            let mut parents = 0;
            for p in n.parents().collect::<BTreeSet<_>>() {
                if !self.nodes.contains_key(&p) {
                    return None;
                }
                parents += 1;
            }
            indegree.insert(n.id, parents);
        }
        let mut consumers: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for n in self.nodes.values() {
            for p in n.parents().collect::<BTreeSet<_>>() {
                consumers.entry(p).or_default().push(n.id);
            }
        }
        let mut ready: BinaryHeap<Reverse<NodeId>> =
            indegree.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| Reverse(id)).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(id)) = ready.pop() {
            order.push(id);
            for c in consumers.get(&id).into_iter().flatten() {
                let d = indegree.get_mut(c).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(*c));
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_some()
    }

    /// Renames node ids through `map`; ids missing from the map are kept.
    pub fn relabel(&self, map: &BTreeMap<NodeId, NodeId>) -> OperationGraph {
        let m = |id: NodeId| *map.get(&id).unwrap_or(&id);
        let mp = |p: &Producer| match p {
            Producer::Node(id) => Producer::Node(m(*id)),
            src => src.clone(),
        };
        let mut out = OperationGraph { contexts: self.contexts.clone(), ..Default::default() };
        for n in self.nodes.values() {
            let mut node = n.clone();
            node.id = m(n.id);
            node.inputs = n.inputs.iter().map(mp).collect();
            out.insert(node);
        }
        out.outputs = self.outputs.iter().map(|(name, ps)| (name.clone(), ps.iter().map(mp).collect())).collect();
        out
    }

    /// Same graph under a seeded random renumbering of its nodes.
    pub fn shuffled(&self, seed: u64) -> OperationGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        let mut targets: Vec<NodeId> = (0..ids.len()).map(|i| NodeId(i * 3 + 7)).collect();
        targets.shuffle(&mut rng);
        self.relabel(&ids.into_iter().zip(targets).collect())
    }

    /// Node order that depends only on graph structure and labels: longest
    /// distance from a root, then a refined structural color.
    pub fn canonical_order(&self) -> Vec<NodeId> {
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        if ids.is_empty() {
            return ids;
        }
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let parents: Vec<Vec<usize>> = ids
            .iter()
            .map(|id| self.parents(*id).into_iter().filter_map(|p| index.get(&p).copied()).collect())
            .collect();
        let mut children = vec![Vec::new(); ids.len()];
        for (i, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(i);
            }
        }

        let mut depth = vec![0usize; ids.len()];
        if let Some(order) = self.topo_order() {
            for id in order {
                let i = index[&id];
                depth[i] = parents[i].iter().map(|&p| depth[p] + 1).max().unwrap_or(0);
            }
        }

        let initial: Vec<String> = ids
            .iter()
            .map(|id| {
                let n = &self.nodes[id];
                let mut srcs: Vec<&str> = n
                    .inputs
                    .iter()
                    .filter_map(|p| match p {
                        Producer::Source(s) => Some(s.as_str()),
                        _ => None,
                    })
                    .collect();
                srcs.sort();
                let mut outs: Vec<&str> = self
                    .outputs
                    .iter()
                    .filter(|(_, ps)| ps.contains(&Producer::Node(*id)))
                    .map(|(name, _)| name.as_str())
                    .collect();
                outs.sort();
                format!(
                    "{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{}",
                    n.op,
                    self.context_keys(n).join(","),
                    n.description,
                    srcs.join(","),
                    outs.join(",")
                )
            })
            .collect();
        let mut colors = ranks(&initial);
        let mut classes = colors.iter().collect::<BTreeSet<_>>().len();
        loop {
            let signature: Vec<(usize, Vec<usize>, Vec<usize>)> = (0..ids.len())
                .map(|i| {
                    let mut ps: Vec<usize> = parents[i].iter().map(|&p| colors[p]).collect();
                    let mut cs: Vec<usize> = children[i].iter().map(|&c| colors[c]).collect();
                    ps.sort();
                    cs.sort();
                    (colors[i], ps, cs)
                })
                .collect();
            let next = ranks(&signature);
            let next_classes = next.iter().collect::<BTreeSet<_>>().len();
            colors = next;
            if next_classes == classes {
                break;
            }
            classes = next_classes;
        }
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by_key(|&i| (depth[i], colors[i], ids[i]));
        order.into_iter().map(|i| ids[i]).collect()
    }

    /// Renumbers nodes 0..n in canonical order.
    pub fn canonicalize(&self) -> OperationGraph {
        let map: BTreeMap<NodeId, NodeId> =
            self.canonical_order().into_iter().enumerate().map(|(i, id)| (id, NodeId(i))).collect();
        let mut g = self.relabel(&map);
        g.next_id = g.nodes.len();
        g
    }

    /// Text serialization that is identical for isomorphic graphs.
    pub fn canonical_form(&self) -> String {
        let g = self.canonicalize();
        let mut out = String::new();
        let prod = |p: &Producer| match p {
            Producer::Node(id) => id.to_string(),
            Producer::Source(s) => format!("src:{s}"),
        };
        for n in g.nodes.values() {
            let mut inputs: Vec<String> = n.inputs.iter().map(prod).collect();
            inputs.sort();
            out.push_str(&format!(
                "{} {} [{}] <- ({}) \"{}\"\n",
                n.id,
                n.op,
                g.context_keys(n).join("; "),
                inputs.join(", "),
                n.description
            ));
        }
        for (name, ps) in &g.outputs {
            let mut ps: Vec<String> = ps.iter().map(prod).collect();
            ps.sort();
            out.push_str(&format!("output {name} <- ({})\n", ps.join(", ")));
        }
        out
    }

    /// Places `other` alongside `self`, renumbering its nodes and contexts.
    pub fn disjoint_union(&self, other: &OperationGraph) -> OperationGraph {
        let offset = self.nodes.keys().next_back().map_or(0, |id| id.0 + 1).max(self.next_id);
        let ctx_offset = self.contexts.keys().next_back().map_or(0, |c| c + 1);
        let map: BTreeMap<NodeId, NodeId> = other.nodes.keys().map(|id| (*id, NodeId(id.0 + offset))).collect();
        let mut shifted = other.relabel(&map);
        let mut out = self.clone();
        for (id, label) in &shifted.contexts {
            out.contexts.insert(id + ctx_offset, ContextLabel { id: id + ctx_offset, ..label.clone() });
        }
        for (_, mut node) in std::mem::take(&mut shifted.nodes) {
            node.contexts = node.contexts.iter().map(|c| c + ctx_offset).collect();
            out.insert(node);
        }
        out.outputs.extend(shifted.outputs);
        out
    }
}

fn ranks<T: Ord + Clone>(items: &[T]) -> Vec<usize> {
    let sorted: BTreeSet<&T> = items.iter().collect();
    let rank: BTreeMap<&T, usize> = sorted.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
    items.iter().map(|t| rank[t]).collect()
}

type Env = BTreeMap<String, Vec<Producer>>;

struct Flattener<'c> {
    cfg: &'c ControlFlowGraph,
    graph: OperationGraph,
}

impl<'c> Flattener<'c> {
    fn resolve(&self, name: &str, scope: &[CfgNodeId], env: &Env) -> Vec<Producer> {
        for (depth, &g) in scope.iter().enumerate().rev() {
            if let CfgNodeKind::Iteration { var, collection, .. } = &self.cfg.node(g).kind {
                if var == name {
                    return self.resolve(collection, &scope[..depth], env);
                }
            }
        }
        env.get(name).cloned().unwrap_or_default()
    }

    fn new_node(&mut self, op: &str, inputs: Vec<Producer>, description: String, scope: &[CfgNodeId]) -> Vec<Producer> {
        let id = self.graph.fresh_id();
        self.graph.insert(OperationNode {
            id,
            op: op.to_string(),
            contexts: BTreeSet::new(),
            inputs,
            description,
            scope: scope.to_vec(),
        });
        vec![Producer::Node(id)]
    }

    /// Lowers `e`, creating one node per operation; returns the producers of its value.
    /// `root_label` overrides the description of the outermost node.
    fn lower(&mut self, e: &Expr, scope: &[CfgNodeId], env: &Env, root_label: Option<String>) -> Vec<Producer> {
        let label = |e: &Expr| root_label.clone().unwrap_or_else(|| expr_text(e));
        match e {
            Expr::Number(..) => Vec::new(),
            Expr::Var(name, _) => self.resolve(name, scope, env),
            Expr::Index { name, indices, .. } => {
                let mut ps = self.resolve(name, scope, env);
                for idx in indices {
                    let sub = self.lower(idx, scope, env, None);
                    push_unique(&mut ps, sub);
                }
                ps
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                let mut inputs = self.lower(lhs, scope, env, None);
                let r = self.lower(rhs, scope, env, None);
                push_unique(&mut inputs, r);
                self.new_node(op.op_name(), inputs, label(e), scope)
            }
            Expr::Neg(inner, _) => {
                let inputs = self.lower(inner, scope, env, None);
                self.new_node(BinOp::Sub.op_name(), inputs, label(e), scope)
            }
            Expr::Call { name, args, .. } => {
                let mut inputs = Vec::new();
                for a in args {
                    let sub = self.lower(a, scope, env, None);
                    push_unique(&mut inputs, sub);
                }
                self.new_node(name, inputs, label(e), scope)
            }
            Expr::Compare(c) => {
                let mut inputs = self.lower(&c.lhs, scope, env, None);
                let r = self.lower(&c.rhs, scope, env, None);
                push_unique(&mut inputs, r);
                self.new_node("compare", inputs, label(e), scope)
            }
        }
    }

    fn block(&mut self, items: &[BlockItem], scope: &[CfgNodeId], env: &mut Env) {
        for item in items {
            match item {
                BlockItem::Assign { target, value } => {
                    let label = format!("{} = {}", target_text(target), match value {
                        Expr::Compare(c) => comparison_text(c),
                        other => expr_text(other),
                    });
                    let ps = self.lower(value, scope, env, Some(label));
                    env.insert(target.name.clone(), ps);
                }
                BlockItem::Init { target, .. } => {
                    env.insert(target.name.clone(), Vec::new());
                }
                BlockItem::Step { target, reducer, var, collection, body } => {
                    let mut inputs = Vec::new();
                    for e in body {
                        let sub = self.lower(e, scope, env, None);
                        push_unique(&mut inputs, sub);
                    }
                    let coll = self.resolve(collection, scope, env);
                    push_unique(&mut inputs, coll);
                    let body_text: Vec<String> = body.iter().map(expr_text).collect();
                    let label = format!(
                        "{} = {} over {var} in {collection} of {}",
                        target_text(target),
                        reducer.op_name(),
                        body_text.join(", ")
                    );
                    let ps = self.new_node(reducer.op_name(), inputs, label, scope);
                    env.insert(target.name.clone(), ps);
                }
            }
        }
    }
}

fn merge_env(into: &mut Env, from: &Env) {
    for (name, ps) in from {
        let slot = into.entry(name.clone()).or_default();
        push_unique(slot, ps.iter().cloned());
    }
}

/// Flattens a structured CFG into its operation graph (contexts not yet assigned).
///
/// Dependencies are reaching definitions over the CFG with each iteration
/// header split in two: the body sees only definitions from before the
/// loop, and the code after the loop sees both those and the body's.
/// Loop-carried dependencies therefore never create cycles.
pub fn flatten(cfg: &ControlFlowGraph) -> OperationGraph {
    let n = cfg.nodes.len();
    let exit_of = |h: CfgNodeId| n + h;
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); 2 * n];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); 2 * n];
    let link = |a: usize, b: usize, preds: &mut Vec<Vec<usize>>, succs: &mut Vec<Vec<usize>>| {
        preds[b].push(a);
        succs[a].push(b);
    };
    for node in &cfg.nodes {
        if matches!(node.kind, CfgNodeKind::Iteration { .. }) {
            link(node.id, exit_of(node.id), &mut preds, &mut succs);
        }
    }
    for e in &cfg.edges {
        match e.kind {
            EdgeKind::Back => link(e.from, exit_of(e.to), &mut preds, &mut succs),
            EdgeKind::Exit => link(exit_of(e.from), e.to, &mut preds, &mut succs),
            _ => link(e.from, e.to, &mut preds, &mut succs),
        }
    }
    let present = |v: usize| v < n || matches!(cfg.nodes[v - n].kind, CfgNodeKind::Iteration { .. });

    let mut f = Flattener { cfg, graph: OperationGraph::default() };
    let mut seed = Env::new();
    for d in &cfg.declarations {
        seed.insert(d.name.clone(), vec![Producer::Source(d.name.clone())]);
    }

    let mut indegree: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..2 * n).filter(|&v| present(v) && indegree[v] == 0).map(Reverse).collect();
    let mut out_env: Vec<Option<Env>> = vec![None; 2 * n];
    let mut end_env = Env::new();
    while let Some(Reverse(v)) = ready.pop() {
        let mut env = if preds[v].is_empty() { seed.clone() } else { Env::new() };
        for &p in &preds[v] {
            if let Some(pe) = &out_env[p] {
                merge_env(&mut env, pe);
            }
        }
        if v < n {
            let node = &cfg.nodes[v];
            match &node.kind {
                CfgNodeKind::Block(items) => f.block(items, &node.scope, &mut env),
                CfgNodeKind::End => end_env = env.clone(),
                _ => {}
            }
        }
        out_env[v] = Some(env);
        for &s in &succs[v] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse(s));
            }
        }
    }

    let mut graph = f.graph;
    graph.outputs = cfg
        .outputs
        .iter()
        .map(|name| (name.clone(), end_env.get(name).cloned().unwrap_or_default()))
        .collect();
    graph
}

fn rename_expr(e: &Expr, from: &str, to: &str) -> Expr {
    let r = |x: &Expr| rename_expr(x, from, to);
    match e {
        Expr::Var(name, span) if name == from => Expr::Var(to.to_string(), *span),
        Expr::Index { name, indices, span } => Expr::Index {
            name: if name == from { to.to_string() } else { name.clone() },
            indices: indices.iter().map(r).collect(),
            span: *span,
        },
        Expr::Binary { op, lhs, rhs, span } => {
            Expr::Binary { op: *op, lhs: Box::new(r(lhs)), rhs: Box::new(r(rhs)), span: *span }
        }
        Expr::Neg(inner, span) => Expr::Neg(Box::new(r(inner)), *span),
        Expr::Call { name, args, span } => Expr::Call { name: name.clone(), args: args.iter().map(r).collect(), span: *span },
        Expr::Compare(c) => Expr::Compare(Box::new(rename_cmp(c, from, to))),
        other => other.clone(),
    }
}

fn rename_cmp(c: &Comparison, from: &str, to: &str) -> Comparison {
    Comparison { lhs: rename_expr(&c.lhs, from, to), op: c.op, rhs: rename_expr(&c.rhs, from, to), span: c.span }
}

/// Whether iterating `collection` restricts attention to part of the data.
/// Declared full collections do not; declared subsets and computed
/// collections do.
fn is_restricting(cfg: &ControlFlowGraph, collection: &str) -> bool {
    match cfg.declarations.iter().find(|d| d.name == collection) {
        Some(d) => d.kind == DeclKind::Subset,
        None => true,
    }
}

/// Attaches context labels: one per filter conjunct, one per `if` conjunct,
/// one per iteration over a subset. Full-collection iteration adds none.
/// Labels with equal keys are shared, so two loops over the same subset
/// mark the same rectangle.
pub fn assign_contexts(mut graph: OperationGraph, cfg: &ControlFlowGraph) -> OperationGraph {
    let mut by_key: BTreeMap<String, ContextId> =
        graph.contexts.values().map(|l| (l.key.clone(), l.id)).collect();
    let ids: Vec<NodeId> = graph.nodes.keys().copied().collect();
    for id in ids {
        let scope = graph.nodes[&id].scope.clone();
        let mut labels = Vec::new();
        for g in scope {
            match &cfg.node(g).kind {
                CfgNodeKind::Iteration { var, collection, .. } if is_restricting(cfg, collection) => labels.push((
                    format!("in {collection}"),
                    format!("{var} in {collection}"),
                    ContextOrigin::FilteredIteration,
                )),
                CfgNodeKind::Selection { conditions, origin, binding } => {
                    for c in conditions {
                        let text = comparison_text(c);
                        let label = match (origin, binding) {
                            (GuardOrigin::Filter, Some((var, coll))) => (
                                format!("{coll} where {}", comparison_text(&rename_cmp(c, var, "_"))),
                                text,
                                ContextOrigin::FilteredIteration,
                            ),
                            _ => (format!("if {text}"), text, ContextOrigin::Selection),
                        };
                        labels.push(label);
                    }
                }
                _ => {}
            }
        }
        for (key, predicate, origin) in labels {
            let next = graph.contexts.len();
            let cid = *by_key.entry(key.clone()).or_insert(next);
            graph.contexts.entry(cid).or_insert(ContextLabel { id: cid, key, predicate, origin });
            graph.nodes.get_mut(&id).unwrap().contexts.insert(cid);
        }
    }
    graph
}

/// `flatten` followed by `assign_contexts`.
pub fn operation_graph(cfg: &ControlFlowGraph) -> OperationGraph {
    assign_contexts(flatten(cfg), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;
    use crate::flowgraph::build_cfg;

    fn graph_of(src: &str) -> OperationGraph {
        operation_graph(&build_cfg(&parse_program(src).unwrap()))
    }

    const TASK1: &str = "input vector price, qty\ncollection items\n\
                         revenue = sum over i in items of price[i] * qty[i]\noutput revenue";

    #[test]
    fn task1_flattens_to_mul_then_sum() {
        let g = graph_of(TASK1);
        assert_eq!(g.len(), 2);
        let mul = &g.nodes[&NodeId(0)];
        let sum = &g.nodes[&NodeId(1)];
        assert_eq!((mul.op.as_str(), sum.op.as_str()), ("mul", "sum"));
        assert_eq!(mul.parents().count(), 0);
        assert_eq!(sum.parents().collect::<Vec<_>>(), vec![NodeId(0)]);
        assert!(mul.contexts.is_empty() && sum.contexts.is_empty());
        assert_eq!(g.outputs, vec![("revenue".to_string(), vec![Producer::Node(NodeId(1))])]);
    }

    #[test]
    fn filters_become_contexts_not_operations() {
        let g = graph_of(
            "input vector price, qty\ncollection items\n\
             revenue = sum over i in items where price[i] > 10 and qty[i] > 100 of price[i] * qty[i]",
        );
        assert_eq!(g.len(), 2);
        assert!(g.iter().all(|n| n.op != "compare"));
        assert!(g.iter().all(|n| n.contexts.len() == 2));
        assert_eq!(g.contexts.len(), 2);
    }

    #[test]
    fn both_if_branches_get_the_condition() {
        let g = graph_of("input scalar a, b\nif a > 0 { x = a * b } else { x = a + b }\ny = x - 1\noutput y");
        let ops: Vec<(&str, usize)> = g.iter().map(|n| (n.op.as_str(), n.contexts.len())).collect();
        assert_eq!(ops, vec![("mul", 1), ("add", 1), ("sub", 0)]);
        // The consumer after the join depends on both definitions.
        assert_eq!(g.parents(NodeId(2)), BTreeSet::from([NodeId(0), NodeId(1)]));
    }

    #[test]
    fn subset_iteration_is_a_context_full_iteration_is_not() {
        let g = graph_of(
            "input vector r\ncollection R\nsubset S\n\
             m = average over x in R of r[x]\nb = average over x in S of r[x] - m",
        );
        let ctx: Vec<usize> = g.iter().map(|n| n.contexts.len()).collect();
        assert_eq!(ctx, vec![0, 1, 1]);
    }

    #[test]
    fn same_subset_shares_one_label() {
        let g = graph_of(
            "input vector v\nsubset S\n\
             for i in S { d[i] = v[i] * 2\n s = sum over j in S of d[j]\n q = sqrt(s) }",
        );
        assert_eq!(g.contexts.len(), 1);
        assert!(g.iter().all(|n| n.contexts.len() == 1));
    }

    #[test]
    fn loop_definitions_reach_past_the_loop_without_cycles() {
        let g = graph_of(
            "input vector a, b\ncollection C\n\
             for i in C { x[i] = b[i] * 2\n y[i] = x[i] + a[i] }\nz = sum over i in C of y[i]\noutput z",
        );
        assert!(g.is_acyclic());
        assert_eq!(g.parents(NodeId(2)), BTreeSet::from([NodeId(1)]));
    }

    #[test]
    fn canonical_form_ignores_numbering() {
        let g = graph_of(TASK1);
        for seed in 0..5 {
            assert_eq!(g.shuffled(seed).canonical_form(), g.canonical_form());
        }
    }

    #[test]
    fn disjoint_union_keeps_both() {
        let g = graph_of(TASK1);
        let u = g.disjoint_union(&g);
        assert_eq!(u.len(), 4);
        assert!(u.is_acyclic());
    }
}
