//! Control flow graphs built from sequences, selections and iterations only.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::dsl::{Ast, Comparison, Declaration, Expr, Reducer, Statement, Target};

pub type CfgNodeId = usize;

/// One primitive statement inside a basic block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockItem {
    Assign { target: Target, value: Expr },
    /// Accumulator initialization emitted ahead of a reduction loop.
    Init { target: Target, reducer: Reducer },
    /// `target = target <reducer> body` executed once per element.
    Step { target: Target, reducer: Reducer, var: String, collection: String, body: Vec<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GuardOrigin {
    /// The condition of an `if`.
    If,
    /// One conjunct of an iteration's `where` clause.
    Filter,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CfgNodeKind {
    Start,
    End,
    Block(Vec<BlockItem>),
    Selection {
        conditions: Vec<Comparison>,
        origin: GuardOrigin,
        /// Loop variable and collection for filter selections.
        binding: Option<(String, String)>,
    },
    Iteration {
        var: String,
        collection: String,
        filters: Vec<Comparison>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfgNode {
    pub id: CfgNodeId,
    pub kind: CfgNodeKind,
    /// Enclosing selection and iteration nodes, outermost first.
    pub scope: Vec<CfgNodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Next,
    True,
    False,
    /// Leaves an iteration once the collection is exhausted.
    Exit,
    /// Returns to an iteration header.
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CfgEdge {
    pub from: CfgNodeId,
    pub to: CfgNodeId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlFlowGraph {
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<CfgEdge>,
    pub declarations: Vec<Declaration>,
    pub outputs: Vec<String>,
}

impl ControlFlowGraph {
    pub fn node(&self, id: CfgNodeId) -> &CfgNode {
        &self.nodes[id]
    }

    pub fn start(&self) -> Option<CfgNodeId> {
        self.nodes.iter().find(|n| n.kind == CfgNodeKind::Start).map(|n| n.id)
    }

    pub fn end(&self) -> Option<CfgNodeId> {
        self.nodes.iter().find(|n| n.kind == CfgNodeKind::End).map(|n| n.id)
    }

    pub fn successors(&self, id: CfgNodeId) -> impl Iterator<Item = &CfgEdge> {
        self.edges.iter().filter(move |e| e.from == id)
    }

    pub fn predecessors(&self, id: CfgNodeId) -> impl Iterator<Item = &CfgEdge> {
        self.edges.iter().filter(move |e| e.to == id)
    }

    pub fn back_edges(&self) -> impl Iterator<Item = &CfgEdge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Back)
    }
}

type Pending = Vec<(CfgNodeId, EdgeKind)>;

struct Builder {
    nodes: Vec<CfgNode>,
    edges: Vec<CfgEdge>,
}

impl Builder {
    fn add(&mut self, kind: CfgNodeKind, scope: &[CfgNodeId]) -> CfgNodeId {
        let id = self.nodes.len();
        self.nodes.push(CfgNode { id, kind, scope: scope.to_vec() });
        id
    }

    fn connect(&mut self, pending: Pending, to: CfgNodeId) {
        for (from, kind) in pending {
            self.edges.push(CfgEdge { from, to, kind });
        }
    }

    /// Appends `item` to the block that `pending` falls through from, or opens a new block.
    fn push_item(&mut self, item: BlockItem, pending: Pending, scope: &[CfgNodeId]) -> Pending {
        if let [(from, EdgeKind::Next)] = pending[..] {
            let node = &mut self.nodes[from];
            if node.scope == scope {
                if let CfgNodeKind::Block(items) = &mut node.kind {
                    items.push(item);
                    return pending;
                }
            }
        }
        let block = self.add(CfgNodeKind::Block(vec![item]), scope);
        self.connect(pending, block);
        vec![(block, EdgeKind::Next)]
    }

    /// Opens an iteration header and the filter selections nested under it.
    /// Returns the header, the scope for the body, and the body's entry edge.
    fn loop_head(
        &mut self,
        var: &str,
        collection: &str,
        filters: &[Comparison],
        pending: Pending,
        scope: &[CfgNodeId],
    ) -> (CfgNodeId, Vec<CfgNodeId>, Pending) {
        let header = self.add(
            CfgNodeKind::Iteration { var: var.into(), collection: collection.into(), filters: filters.to_vec() },
            scope,
        );
        self.connect(pending, header);
        let mut inner = scope.to_vec();
        inner.push(header);
        let mut entry = vec![(header, EdgeKind::True)];
        for cond in filters {
            let sel = self.add(
                CfgNodeKind::Selection {
                    conditions: vec![cond.clone()],
                    origin: GuardOrigin::Filter,
                    binding: Some((var.into(), collection.into())),
                },
                &inner,
            );
            self.connect(entry, sel);
            // A failed filter skips to the next element.
            self.edges.push(CfgEdge { from: sel, to: header, kind: EdgeKind::Back });
            inner.push(sel);
            entry = vec![(sel, EdgeKind::True)];
        }
        (header, inner, entry)
    }

    fn close_loop(&mut self, body_exit: Pending, header: CfgNodeId) -> Pending {
        for (from, _) in body_exit {
            self.edges.push(CfgEdge { from, to: header, kind: EdgeKind::Back });
        }
        vec![(header, EdgeKind::Exit)]
    }

    fn statements(&mut self, stmts: &[Statement], mut pending: Pending, scope: &[CfgNodeId]) -> Pending {
        for s in stmts {
            pending = self.statement(s, pending, scope);
        }
        pending
    }

    fn statement(&mut self, stmt: &Statement, pending: Pending, scope: &[CfgNodeId]) -> Pending {
        match stmt {
            Statement::Assign { target, value, .. } => {
                self.push_item(BlockItem::Assign { target: target.clone(), value: value.clone() }, pending, scope)
            }
            Statement::Accumulate { target, reducer, var, collection, filters, body, .. } => {
                let pending =
                    self.push_item(BlockItem::Init { target: target.clone(), reducer: reducer.clone() }, pending, scope);
                let (header, inner, entry) = self.loop_head(var, collection, filters, pending, scope);
                let step = BlockItem::Step {
                    target: target.clone(),
                    reducer: reducer.clone(),
                    var: var.clone(),
                    collection: collection.clone(),
                    body: body.clone(),
                };
                let block = self.add(CfgNodeKind::Block(vec![step]), &inner);
                self.connect(entry, block);
                self.close_loop(vec![(block, EdgeKind::Next)], header)
            }
            Statement::ForEach { var, collection, filters, body, .. } => {
                let (header, inner, entry) = self.loop_head(var, collection, filters, pending, scope);
                let exit = self.statements(body, entry, &inner);
                self.close_loop(exit, header)
            }
            Statement::If { condition, then_body, else_body, .. } => {
                let sel = self.add(
                    CfgNodeKind::Selection { conditions: condition.clone(), origin: GuardOrigin::If, binding: None },
                    scope,
                );
                self.connect(pending, sel);
                let mut inner = scope.to_vec();
                inner.push(sel);
                let mut exits = self.statements(then_body, vec![(sel, EdgeKind::True)], &inner);
                if else_body.is_empty() {
                    exits.push((sel, EdgeKind::False));
                } else {
                    exits.extend(self.statements(else_body, vec![(sel, EdgeKind::False)], &inner));
                }
                exits
            }
        }
    }
}

/// Lowers a validated program to its control flow graph. Node ids follow
/// program order.
pub fn build_cfg(ast: &Ast) -> ControlFlowGraph {
    let mut b = Builder { nodes: Vec::new(), edges: Vec::new() };
    let start = b.add(CfgNodeKind::Start, &[]);
    let exit = b.statements(&ast.statements, vec![(start, EdgeKind::Next)], &[]);
    let end = b.add(CfgNodeKind::End, &[]);
    b.connect(exit, end);
    ControlFlowGraph {
        nodes: b.nodes,
        edges: b.edges,
        declarations: ast.declarations.clone(),
        outputs: ast.outputs.iter().map(|o| o.name.clone()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureReport {
    pub structured: bool,
    pub diagnostics: Vec<String>,
}

/// Decides whether `cfg` decomposes into nested sequence, selection and
/// iteration regions, by collapsing such regions until only Start → End
/// remains.
pub fn verify_structured(cfg: &ControlFlowGraph) -> StructureReport {
    let mut diagnostics = Vec::new();
    let starts: Vec<_> = cfg.nodes.iter().filter(|n| n.kind == CfgNodeKind::Start).collect();
    let ends: Vec<_> = cfg.nodes.iter().filter(|n| n.kind == CfgNodeKind::End).collect();
    if starts.len() != 1 {
        diagnostics.push(format!("expected exactly one Start node, found {}", starts.len()));
    }
    if ends.len() != 1 {
        diagnostics.push(format!("expected exactly one End node, found {}", ends.len()));
    }
    for e in &cfg.edges {
        if e.from >= cfg.nodes.len() || e.to >= cfg.nodes.len() {
            diagnostics.push(format!("edge {} -> {} references a missing node", e.from, e.to));
        }
    }
    if !diagnostics.is_empty() {
        return StructureReport { structured: false, diagnostics };
    }
    let (start, end) = (starts[0].id, ends[0].id);

    for node in &cfg.nodes {
        let out = cfg.successors(node.id).count();
        match &node.kind {
            CfgNodeKind::Selection { .. } if out != 2 => {
                diagnostics.push(format!("selection node {} has {out} out-edges, expected 2", node.id))
            }
            CfgNodeKind::Iteration { .. } if cfg.predecessors(node.id).all(|e| e.kind != EdgeKind::Back) => {
                diagnostics.push(format!("iteration node {} has no back-edge", node.id))
            }
            CfgNodeKind::End if out != 0 => diagnostics.push("End node has out-edges".to_string()),
            _ => {}
        }
    }

    let mut succ: BTreeMap<CfgNodeId, BTreeSet<CfgNodeId>> = BTreeMap::new();
    let mut pred: BTreeMap<CfgNodeId, BTreeSet<CfgNodeId>> = BTreeMap::new();
    for n in &cfg.nodes {
        succ.entry(n.id).or_default();
        pred.entry(n.id).or_default();
    }
    for e in &cfg.edges {
        succ.get_mut(&e.from).unwrap().insert(e.to);
        pred.get_mut(&e.to).unwrap().insert(e.from);
    }

    let forward = reachable(start, &succ);
    let backward = reachable(end, &pred);
    for n in &cfg.nodes {
        if !forward.contains(&n.id) {
            diagnostics.push(format!("node {} is unreachable from Start", n.id));
        }
        if !backward.contains(&n.id) {
            diagnostics.push(format!("End is unreachable from node {}", n.id));
        }
    }
    if !diagnostics.is_empty() {
        return StructureReport { structured: false, diagnostics };
    }

    let mut g = RegionGraph { succ, pred };
    while g.step(start, end) {}
    let remaining = g.succ.len();
    let structured = remaining == 2 && g.succ[&start].len() == 1 && g.succ[&start].contains(&end);
    if !structured {
        let stuck: Vec<String> = g.succ.keys().filter(|&&n| n != start && n != end).map(|n| n.to_string()).collect();
        diagnostics.push(format!("no structured region decomposition; irreducible remainder at nodes [{}]", stuck.join(", ")));
    }
    StructureReport { structured, diagnostics }
}

fn reachable(from: CfgNodeId, adj: &BTreeMap<CfgNodeId, BTreeSet<CfgNodeId>>) -> BTreeSet<CfgNodeId> {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        for &m in &adj[&n] {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    seen
}

/// Region-collapsing rewrite system over a simple digraph.
struct RegionGraph {
    succ: BTreeMap<CfgNodeId, BTreeSet<CfgNodeId>>,
    pred: BTreeMap<CfgNodeId, BTreeSet<CfgNodeId>>,
}

impl RegionGraph {
    fn single(set: &BTreeSet<CfgNodeId>) -> Option<CfgNodeId> {
        (set.len() == 1).then(|| *set.iter().next().unwrap())
    }

    fn remove_edge(&mut self, a: CfgNodeId, b: CfgNodeId) {
        self.succ.get_mut(&a).unwrap().remove(&b);
        self.pred.get_mut(&b).unwrap().remove(&a);
    }

    fn add_edge(&mut self, a: CfgNodeId, b: CfgNodeId) {
        self.succ.get_mut(&a).unwrap().insert(b);
        self.pred.get_mut(&b).unwrap().insert(a);
    }

    fn remove_node(&mut self, n: CfgNodeId) {
        for s in self.succ.remove(&n).unwrap() {
            if let Some(p) = self.pred.get_mut(&s) {
                p.remove(&n);
            }
        }
        for p in self.pred.remove(&n).unwrap() {
            if let Some(s) = self.succ.get_mut(&p) {
                s.remove(&n);
            }
        }
    }

    /// Applies one region collapse; false once none applies.
    fn step(&mut self, start: CfgNodeId, end: CfgNodeId) -> bool {
        let ids: Vec<CfgNodeId> = self.succ.keys().copied().collect();
        // Iteration whose body has collapsed into a self-loop.
        for &n in &ids {
            if self.succ[&n].contains(&n) {
                self.remove_edge(n, n);
                return true;
            }
        }
        for &u in &ids {
            let succs: Vec<CfgNodeId> = self.succ[&u].iter().copied().collect();
            // Sequence: u -> v where v has no other entry and u no other exit.
            if let [v] = succs[..] {
                if v != end && v != start && Self::single(&self.pred[&v]) == Some(u) {
                    let next: Vec<CfgNodeId> = self.succ[&v].iter().copied().collect();
                    self.remove_node(v);
                    for w in next {
                        self.add_edge(u, w);
                    }
                    return true;
                }
            }
            if let [a, b] = succs[..] {
                for (x, y) in [(a, b), (b, a)] {
                    let x_entry_ok = x != end && x != start && Self::single(&self.pred[&x]) == Some(u);
                    if !x_entry_ok {
                        continue;
                    }
                    let x_exit = Self::single(&self.succ[&x]);
                    // One-armed selection, or an iteration body returning to its header.
                    if x_exit == Some(y) || x_exit == Some(u) {
                        self.remove_node(x);
                        return true;
                    }
                    // Two-armed selection joining at a common node.
                    let y_entry_ok = y != end && y != start && Self::single(&self.pred[&y]) == Some(u);
                    if y_entry_ok {
                        if let (Some(j), Some(k)) = (x_exit, Self::single(&self.succ[&y])) {
                            if j == k && j != u {
                                self.remove_node(x);
                                self.remove_node(y);
                                self.add_edge(u, j);
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;

    fn cfg_of(src: &str) -> ControlFlowGraph {
        build_cfg(&parse_program(src).unwrap())
    }

    const TASK1: &str = "input vector price, qty\ncollection items\n\
                         revenue = sum over i in items of price[i] * qty[i]\noutput revenue";

    #[test]
    fn task1_shape() {
        let cfg = cfg_of(TASK1);
        let kinds: Vec<&str> = cfg
            .nodes
            .iter()
            .map(|n| match n.kind {
                CfgNodeKind::Start => "start",
                CfgNodeKind::End => "end",
                CfgNodeKind::Block(ref items) if matches!(items[0], BlockItem::Init { .. }) => "init",
                CfgNodeKind::Block(_) => "body",
                CfgNodeKind::Iteration { .. } => "header",
                CfgNodeKind::Selection { .. } => "select",
            })
            .collect();
        assert_eq!(kinds, ["start", "init", "header", "body", "end"]);
        assert_eq!(cfg.back_edges().count(), 1);
        assert!(cfg.edges.contains(&CfgEdge { from: 3, to: 2, kind: EdgeKind::Back }));
        assert!(cfg.edges.contains(&CfgEdge { from: 2, to: 4, kind: EdgeKind::Exit }));
        assert!(verify_structured(&cfg).structured);
    }

    #[test]
    fn single_assignment_has_three_nodes() {
        let cfg = cfg_of("input scalar a, b\nx = a + b");
        assert_eq!(cfg.nodes.len(), 3);
        assert!(verify_structured(&cfg).structured);
    }

    #[test]
    fn task2_adds_a_selection_inside_the_loop() {
        let cfg = cfg_of(
            "input vector price, qty\ncollection items\n\
             revenue = sum over i in items where price[i] > 10 of price[i] * qty[i]",
        );
        let sel = cfg.nodes.iter().find(|n| matches!(n.kind, CfgNodeKind::Selection { .. })).unwrap();
        assert_eq!(sel.scope, vec![2]);
        assert_eq!(cfg.successors(sel.id).count(), 2);
        assert!(verify_structured(&cfg).structured);
    }

    #[test]
    fn empty_program_is_structured() {
        let cfg = ControlFlowGraph {
            nodes: vec![
                CfgNode { id: 0, kind: CfgNodeKind::Start, scope: vec![] },
                CfgNode { id: 1, kind: CfgNodeKind::End, scope: vec![] },
            ],
            edges: vec![CfgEdge { from: 0, to: 1, kind: EdgeKind::Next }],
            declarations: vec![],
            outputs: vec![],
        };
        assert!(verify_structured(&cfg).structured);
    }

    #[test]
    fn jump_into_loop_body_is_rejected() {
        // start -> a -> header <-> b1 -> b2 -> header, header -> end, plus a -> b2.
        let block = || CfgNodeKind::Block(vec![]);
        let iter = CfgNodeKind::Iteration { var: "i".into(), collection: "C".into(), filters: vec![] };
        let kinds = [CfgNodeKind::Start, block(), iter, block(), block(), CfgNodeKind::End];
        let nodes = kinds.into_iter().enumerate().map(|(id, kind)| CfgNode { id, kind, scope: vec![] }).collect();
        let e = |from, to, kind| CfgEdge { from, to, kind };
        let cfg = ControlFlowGraph {
            nodes,
            edges: vec![
                e(0, 1, EdgeKind::Next),
                e(1, 2, EdgeKind::Next),
                e(2, 3, EdgeKind::True),
                e(3, 4, EdgeKind::Next),
                e(4, 2, EdgeKind::Back),
                e(2, 5, EdgeKind::Exit),
                e(1, 4, EdgeKind::Next),
            ],
            declarations: vec![],
            outputs: vec![],
        };
        let report = verify_structured(&cfg);
        assert!(!report.structured);
        assert!(!report.diagnostics.is_empty());
    }

    #[test]
    fn nested_control_is_structured() {
        let cfg = cfg_of(
            "input vector v\ninput scalar a\ncollection C\nsubset S\n\
             for i in C where v[i] > 0 and v[i] < 9 {\n\
               if a > 1 { d[i] = v[i] * a } else { d[i] = v[i] }\n\
               t = sum over j in S of d[j]\n\
               for j in S { e[j] = d[j] + t }\n\
             }\n\
             if a > 0 { y = a } \n z = 1",
        );
        let report = verify_structured(&cfg);
        assert!(report.structured, "{:?}", report.diagnostics);
    }
}
