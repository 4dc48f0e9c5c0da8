//! DOT, JSON and table output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::Serialize;

use crate::abstraction::OperationContextGraph;
use crate::dsl::{expr_text, target_text, Reducer, SourceProgram};
use crate::flowgraph::{BlockItem, CfgNodeKind, ControlFlowGraph, EdgeKind};
use crate::kb::SchemaKnowledgeBase;
use crate::opgraph::{ContextId, NodeId, OperationGraph};
use crate::scoring::{evaluate, format_symbolic, node_scores, round2, GrowthFunction};
use crate::{analyze, PipelineError, Score};

pub const REPORT_VERSION: u32 = 1;

fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

const START_END: &str = "  start [label=\"Start\", shape=diamond, style=dashed];\n  \
                         end [label=\"End\", shape=diamond, style=dashed];\n";

fn item_text(item: &BlockItem) -> String {
    match item {
        BlockItem::Assign { target, value } => format!("{} = {}", target_text(target), expr_text(value)),
        BlockItem::Init { target, .. } => format!("init {}", target_text(target)),
        BlockItem::Step { target, reducer, body, .. } => {
            let body: Vec<String> = body.iter().map(expr_text).collect();
            let t = target_text(target);
            match reducer {
                Reducer::Sum => format!("{t} += {}", body.join(", ")),
                Reducer::Product => format!("{t} *= {}", body.join(", ")),
                Reducer::Named(n) => format!("{t} <- {n}({}, {})", t, body.join(", ")),
            }
        }
    }
}

pub fn cfg_to_dot(cfg: &ControlFlowGraph) -> String {
    let mut out = String::from("digraph cfg {\n  node [shape=box];\n");
    let name = |id: usize| match cfg.nodes[id].kind {
        CfgNodeKind::Start => "start".to_string(),
        CfgNodeKind::End => "end".to_string(),
        _ => format!("c{id}"),
    };
    out.push_str(START_END);
    for n in &cfg.nodes {
        let (label, shape) = match &n.kind {
            CfgNodeKind::Start | CfgNodeKind::End => continue,
            CfgNodeKind::Block(items) => (items.iter().map(item_text).collect::<Vec<_>>().join("\n"), "box"),
            CfgNodeKind::Selection { conditions, .. } => (crate::dsl::filters_text(conditions), "diamond"),
            CfgNodeKind::Iteration { var, collection, .. } => (format!("for {var} in {collection}"), "hexagon"),
        };
        let _ = writeln!(out, "  c{} [label=\"{}\", shape={shape}];", n.id, esc(&label));
    }
    for e in &cfg.edges {
        let attrs = match e.kind {
            EdgeKind::Next => String::new(),
            EdgeKind::True => " [label=\"T\"]".into(),
            EdgeKind::False => " [label=\"F\"]".into(),
            EdgeKind::Exit => " [label=\"exit\"]".into(),
            EdgeKind::Back => " [label=\"back\", style=dashed, constraint=false]".into(),
        };
        let _ = writeln!(out, "  {} -> {}{attrs};", name(e.from), name(e.to));
    }
    out.push_str("}\n");
    out
}

#[derive(Default)]
struct Trie {
    members: Vec<NodeId>,
    children: BTreeMap<ContextId, Trie>,
}

/// Operation graph with contexts drawn as nested clusters.
pub fn graph_to_dot(graph: &OperationGraph, title: &str) -> String {
    let mut out = format!("digraph \"{}\" {{\n  node [shape=box, style=rounded];\n", esc(title));
    out.push_str(START_END);

    let mut size: BTreeMap<ContextId, usize> = BTreeMap::new();
    for n in graph.iter() {
        for c in &n.contexts {
            *size.entry(*c).or_default() += 1;
        }
    }
    // Wider contexts outermost; nested or disjoint contexts then each map
    // to one cluster.
    let mut root = Trie::default();
    for n in graph.iter() {
        let mut path: Vec<ContextId> = n.contexts.iter().copied().collect();
        path.sort_by_key(|c| (std::cmp::Reverse(size[c]), *c));
        let mut t = &mut root;
        for c in path {
            t = t.children.entry(c).or_default();
        }
        t.members.push(n.id);
    }
    let mut counter = 0;
    write_trie(&mut out, graph, &root, 1, &mut counter);

    let mut roots = Vec::new();
    for n in graph.iter() {
        let parents: BTreeSet<NodeId> = n.parents().collect();
        if parents.is_empty() {
            roots.push(n.id);
        }
        for p in parents {
            let _ = writeln!(out, "  n{} -> n{};", p.0, n.id.0);
        }
    }
    for r in roots {
        let _ = writeln!(out, "  start -> n{};", r.0);
    }
    let sinks: BTreeSet<NodeId> = graph
        .outputs
        .iter()
        .flat_map(|(_, ps)| ps.iter())
        .filter_map(|p| match p {
            crate::opgraph::Producer::Node(id) => Some(*id),
            _ => None,
        })
        .collect();
    for s in &sinks {
        let _ = writeln!(out, "  n{} -> end;", s.0);
    }
    if graph.is_empty() {
        out.push_str("  start -> end;\n");
    }
    out.push_str("}\n");
    out
}

fn write_trie(out: &mut String, graph: &OperationGraph, t: &Trie, depth: usize, counter: &mut usize) {
    let pad = "  ".repeat(depth);
    for id in &t.members {
        let n = &graph.nodes[id];
        let _ = writeln!(out, "{pad}n{} [label=\"{}\\n{}\"];", id.0, esc(&n.op), esc(&n.description));
    }
    for (c, child) in &t.children {
        let label = graph.contexts.get(c).map_or(String::new(), |l| l.predicate.clone());
        let _ = writeln!(out, "{pad}subgraph cluster_{} {{", *counter);
        *counter += 1;
        let _ = writeln!(out, "{pad}  label=\"{}\";", esc(&label));
        write_trie(out, graph, child, depth + 1, counter);
        let _ = writeln!(out, "{pad}}}");
    }
}

pub fn ocg_to_dot(ocg: &OperationContextGraph) -> String {
    graph_to_dot(&ocg.graph, &format!("ocg {}", ocg.kb_name))
}

/// DOT for either graph kind.
pub enum Renderable<'a> {
    Cfg(&'a ControlFlowGraph),
    Graph(&'a OperationGraph),
    Ocg(&'a OperationContextGraph),
}

pub fn to_dot(g: Renderable<'_>) -> String {
    match g {
        Renderable::Cfg(c) => cfg_to_dot(c),
        Renderable::Graph(g) => graph_to_dot(g, "operations"),
        Renderable::Ocg(o) => ocg_to_dot(o),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRecord {
    pub id: usize,
    pub op: String,
    pub description: String,
    pub contexts: Vec<String>,
    pub c: u32,
    pub p: u32,
    pub cl: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub contexts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreReport {
    pub report_version: u32,
    pub program: String,
    pub kb: String,
    pub nodes: Vec<NodeRecord>,
    pub symbolic: String,
    pub numeric: Score,
    pub growth: GrowthFunction,
    pub stats: GraphStats,
}

pub fn build_report(
    program: &str,
    ocg: &OperationContextGraph,
    growth: GrowthFunction,
) -> Result<ScoreReport, PipelineError> {
    let scores = node_scores(ocg);
    let nodes = scores
        .iter()
        .map(|s| {
            let n = &ocg.nodes[&s.node];
            NodeRecord {
                id: s.node.0,
                op: n.op.clone(),
                description: n.description.clone(),
                contexts: n.contexts.iter().filter_map(|c| ocg.contexts.get(c)).map(|l| l.predicate.clone()).collect(),
                c: s.context,
                p: s.parents,
                cl: s.load,
            }
        })
        .collect();
    let poly = scores.iter().map(|s| s.load).collect();
    let numeric: Score = evaluate(&poly, &growth)?;
    Ok(ScoreReport {
        report_version: REPORT_VERSION,
        program: program.to_string(),
        kb: ocg.kb_name.clone(),
        nodes,
        symbolic: format_symbolic(&poly),
        numeric: round2(numeric),
        growth,
        stats: GraphStats { nodes: ocg.len(), edges: ocg.edge_count(), contexts: ocg.used_contexts().len() },
    })
}

pub fn score_report(
    program: &SourceProgram,
    kb: &SchemaKnowledgeBase,
    growth: GrowthFunction,
) -> Result<ScoreReport, PipelineError> {
    let a = analyze(&program.text, kb)?;
    build_report(&program.name(), &a.ocg, growth)
}

pub fn report_json(report: &ScoreReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

#[derive(Serialize)]
struct ErrorDiagnostic {
    line: u32,
    column: u32,
    message: String,
}

#[derive(Serialize)]
struct ErrorBody {
    stage: String,
    diagnostics: Vec<ErrorDiagnostic>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ErrorDocument {
    report_version: u32,
    error: ErrorBody,
}

/// Structured form of a pipeline failure.
pub fn error_json(err: &PipelineError) -> String {
    let doc = ErrorDocument {
        report_version: REPORT_VERSION,
        error: ErrorBody {
            stage: err.stage().into(),
            diagnostics: err
                .diagnostics()
                .into_iter()
                .map(|(span, message)| ErrorDiagnostic { line: span.line, column: span.column, message })
                .collect(),
        },
    };
    serde_json::to_string_pretty(&doc).expect("error serializes") + "\n"
}

pub fn report_text(r: &ScoreReport) -> String {
    let mut out = format!("program: {}\nkb: {}\n\n", r.program, r.kb);
    let rows: Vec<[String; 5]> = r
        .nodes
        .iter()
        .map(|n| [format!("n{}", n.id), n.op.clone(), n.c.to_string(), n.p.to_string(), n.cl.to_string()])
        .collect();
    let head = ["node", "op", "C", "P", "CL"].map(String::from);
    let widths: Vec<usize> =
        (0..5).map(|i| rows.iter().chain([&head]).map(|row| row[i].len()).max().unwrap_or(0)).collect();
    let line = |row: &[String; 5], desc: &str| {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        format!("{}  {desc}", cells.join("  ")).trim_end().to_string() + "\n"
    };
    out.push_str(&line(&head, "description"));
    for (row, n) in rows.iter().zip(&r.nodes) {
        out.push_str(&line(row, &n.description));
    }
    let _ = writeln!(out, "\nscore: {} = {:.2}", r.symbolic, r.numeric);
    if r.growth != GrowthFunction::Exp {
        let _ = writeln!(out, "growth: {}", r.growth.name());
    }
    out
}

/// Programs as rows, knowledge bases as columns.
pub fn compare(reports: &[ScoreReport]) -> String {
    let mut programs: Vec<&str> = Vec::new();
    let mut kbs: Vec<&str> = Vec::new();
    for r in reports {
        if !programs.contains(&r.program.as_str()) {
            programs.push(&r.program);
        }
        if !kbs.contains(&r.kb.as_str()) {
            kbs.push(&r.kb);
        }
    }
    let cell = |p: &str, k: &str| {
        reports
            .iter()
            .find(|r| r.program == p && r.kb == k)
            .map_or("-".to_string(), |r| format!("{} = {:.2}", r.symbolic, r.numeric))
    };
    let mut table: Vec<Vec<String>> = vec![std::iter::once("program".to_string()).chain(kbs.iter().map(|k| k.to_string())).collect()];
    for p in &programs {
        table.push(std::iter::once(p.to_string()).chain(kbs.iter().map(|k| cell(p, k))).collect());
    }
    let widths: Vec<usize> = (0..=kbs.len()).map(|i| table.iter().map(|row| row[i].len()).max().unwrap_or(0)).collect();
    let mut out = String::from("cognitive complexity (lower is better)\n");
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("-+-"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{entry, high_kb, low_kb};

    fn report(name: &str, kb: &SchemaKnowledgeBase) -> ScoreReport {
        let program = SourceProgram { text: entry(name).unwrap().source.into(), origin: format!("{name}.alg") };
        score_report(&program, kb, GrowthFunction::Exp).unwrap()
    }

    #[test]
    fn uib_report() {
        let r = report("uib", &low_kb());
        assert_eq!(r.symbolic, "2e^4 + 3e^3 + e");
        assert_eq!(r.numeric, 172.17);
        assert_eq!(r.stats.nodes, 6);
        assert_eq!(r.stats.contexts, 2);
    }

    #[test]
    fn json_key_order_is_fixed() {
        let json = report_json(&report("revenue_task1", &high_kb()));
        let keys = ["reportVersion", "program", "kb", "nodes", "symbolic", "numeric", "growth", "stats"];
        let positions: Vec<usize> = keys.iter().map(|k| json.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(json.contains("\"symbolic\": \"e\""));
        assert!(json.contains("\"numeric\": 2.72"));
    }

    #[test]
    fn recomposes_symbolic_score() {
        let r = report("uuknn", &low_kb());
        let poly: crate::EPolynomial = r.nodes.iter().map(|n| n.cl).collect();
        assert_eq!(format_symbolic(&poly), r.symbolic);
        assert!(r.nodes.iter().all(|n| n.cl == n.c + n.p + 1));
    }

    #[test]
    fn error_document_shape() {
        let err = score_report(&SourceProgram::inline("x = y"), &low_kb(), GrowthFunction::Exp).unwrap_err();
        let v: serde_json::Value = serde_json::from_str(&error_json(&err)).unwrap();
        assert_eq!(v["reportVersion"], 1);
        assert_eq!(v["error"]["stage"], "validate");
        assert_eq!(v["error"]["diagnostics"][0]["line"], 1);
        assert_eq!(v["error"]["diagnostics"][0]["column"], 5);
    }

    #[test]
    fn comparison_table() {
        let reports = vec![report("uib", &low_kb()), report("uib", &high_kb()), report("uuknn", &low_kb()), report("uuknn", &high_kb())];
        let t = compare(&reports);
        assert!(t.starts_with("cognitive complexity (lower is better)"));
        assert_eq!(t.lines().count(), 5);
        assert!(t.contains("2e^4 + 11e^3 + 4e^2 = 359.69"));
        assert!(t.contains("2e^4 + 6e^3 + 4e^2 = 259.27"));
    }

    #[test]
    fn single_report_table() {
        let t = compare(&[report("revenue_task1", &low_kb())]);
        assert_eq!(t.lines().count(), 4);
    }

    #[test]
    fn empty_graph_dot_has_only_terminals() {
        let dot = graph_to_dot(&OperationGraph::default(), "empty");
        assert!(dot.contains("start -> end;"));
        assert!(!dot.contains("n0"));
    }
}
