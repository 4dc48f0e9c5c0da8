use std::collections::{BTreeMap, BTreeSet};

use cogload::corpus::{entries, entry, high_kb, low_kb};
use cogload::propgen::{gen_source, ProgramGenConfig};
use cogload::report::{cfg_to_dot, graph_to_dot, ocg_to_dot};
use cogload::{analyze, front_end, OperationGraph};

#[derive(Debug, PartialEq)]
enum Tok {
    Id(String),
    Str(String),
    Sym(&'static str),
}

fn lex(text: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            c if c.is_whitespace() => {}
            '"' => {
                let mut s = String::new();
                loop {
                    match chars.next().expect("unterminated string") {
                        '"' => break,
                        '\\' => {
                            s.push('\\');
                            s.push(chars.next().expect("dangling escape"));
                        }
                        c => s.push(c),
                    }
                }
                out.push(Tok::Str(s));
            }
            '-' if chars.peek() == Some(&'>') => {
                chars.next();
                out.push(Tok::Sym("->"));
            }
            '{' => out.push(Tok::Sym("{")),
            '}' => out.push(Tok::Sym("}")),
            '[' => out.push(Tok::Sym("[")),
            ']' => out.push(Tok::Sym("]")),
            '=' => out.push(Tok::Sym("=")),
            ';' => out.push(Tok::Sym(";")),
            ',' => out.push(Tok::Sym(",")),
            c if c.is_alphanumeric() || c == '_' => {
                let mut s = c.to_string();
                while let Some(&d) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' || d == '.' {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Id(s));
            }
            c => panic!("unexpected character {c:?}"),
        }
    }
    out
}

#[derive(Debug, Default)]
struct Cluster {
    label: String,
    nodes: BTreeSet<String>,
    clusters: Vec<Cluster>,
}

#[derive(Debug, Default)]
struct Dot {
    root: Cluster,
    nodes: BTreeMap<String, BTreeMap<String, String>>,
    edges: Vec<(String, String, BTreeMap<String, String>)>,
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Tok {
        self.pos += 1;
        std::mem::replace(&mut self.toks[self.pos - 1], Tok::Sym(";"))
    }

    fn expect(&mut self, s: &'static str) {
        assert_eq!(self.bump(), Tok::Sym(s));
    }

    fn ident(&mut self) -> String {
        match self.bump() {
            Tok::Id(s) | Tok::Str(s) => s,
            t => panic!("expected identifier, found {t:?}"),
        }
    }

    fn attrs(&mut self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        if self.peek() != Some(&Tok::Sym("[")) {
            return out;
        }
        self.bump();
        while self.peek() != Some(&Tok::Sym("]")) {
            let k = self.ident();
            self.expect("=");
            let v = self.ident();
            out.insert(k, v);
            if self.peek() == Some(&Tok::Sym(",")) {
                self.bump();
            }
        }
        self.expect("]");
        out
    }

    fn body(&mut self, dot: &mut Dot, cluster: &mut Cluster) {
        self.expect("{");
        while self.peek() != Some(&Tok::Sym("}")) {
            let head = self.ident();
            if head == "subgraph" {
                let mut inner = Cluster::default();
                let name = self.ident();
                assert!(name.starts_with("cluster_"), "{name}");
                self.body(dot, &mut inner);
                cluster.clusters.push(inner);
                continue;
            }
            if self.peek() == Some(&Tok::Sym("=")) {
                self.bump();
                let v = self.ident();
                if head == "label" {
                    cluster.label = v;
                }
            } else if self.peek() == Some(&Tok::Sym("->")) {
                self.bump();
                let to = self.ident();
                let a = self.attrs();
                dot.edges.push((head, to, a));
            } else {
                let a = self.attrs();
                if head != "node" && head != "edge" && head != "graph" {
                    cluster.nodes.insert(head.clone());
                    assert!(dot.nodes.insert(head, a).is_none(), "node declared twice");
                }
            }
            self.expect(";");
        }
        self.expect("}");
    }
}

fn parse_dot(text: &str) -> Dot {
    let mut p = Parser { toks: lex(text), pos: 0 };
    assert_eq!(p.ident(), "digraph");
    p.ident();
    let mut dot = Dot::default();
    let mut root = Cluster::default();
    p.body(&mut dot, &mut root);
    assert!(p.peek().is_none(), "trailing tokens");
    dot.root = root;
    for (a, b, _) in &dot.edges {
        assert!(dot.nodes.contains_key(a) && dot.nodes.contains_key(b), "edge {a} -> {b} to undeclared node");
    }
    dot
}

/// Cluster labels enclosing each node, outermost first.
fn enclosing(c: &Cluster, path: &mut Vec<String>, out: &mut BTreeMap<String, Vec<String>>) {
    for n in &c.nodes {
        out.insert(n.clone(), path.clone());
    }
    for inner in &c.clusters {
        path.push(inner.label.clone());
        enclosing(inner, path, out);
        path.pop();
    }
}

fn op_nodes(dot: &Dot) -> usize {
    dot.nodes.keys().filter(|n| n.starts_with('n')).count()
}

fn assert_matches_graph(graph: &OperationGraph, dot: &Dot) {
    assert_eq!(op_nodes(dot), graph.len());
    let mut paths = BTreeMap::new();
    enclosing(&dot.root, &mut Vec::new(), &mut paths);
    for n in graph.iter() {
        let name = format!("n{}", n.id.0);
        let got: BTreeSet<&String> = paths[&name].iter().collect();
        let want: BTreeSet<&String> = n.contexts.iter().map(|c| &graph.contexts[c].predicate).collect();
        assert_eq!(got, want, "{name}");
        assert_eq!(paths[&name].len(), n.contexts.len(), "{name}");
    }
    let edges: BTreeSet<(String, String)> = dot
        .edges
        .iter()
        .filter(|(a, b, _)| a.starts_with('n') && b.starts_with('n'))
        .map(|(a, b, _)| (a.clone(), b.clone()))
        .collect();
    let want: BTreeSet<(String, String)> = graph
        .iter()
        .flat_map(|n| n.parents().map(move |p| (format!("n{}", p.0), format!("n{}", n.id.0))))
        .collect();
    assert_eq!(edges, want);
}

#[test]
fn corpus_dot_round_trips() {
    for e in entries() {
        for kb in [low_kb(), high_kb()] {
            let a = analyze(e.source, &kb).unwrap();
            assert_matches_graph(&a.ocg, &parse_dot(&ocg_to_dot(&a.ocg)));
            assert_matches_graph(&a.flat, &parse_dot(&graph_to_dot(&a.flat, "flat")));
            let cfg = parse_dot(&cfg_to_dot(&a.cfg));
            assert_eq!(cfg.nodes.len(), a.cfg.nodes.len());
        }
    }
}

#[test]
fn generated_dot_round_trips() {
    for seed in 0..100 {
        let src = gen_source(&ProgramGenConfig::with_seed(seed));
        let a = analyze(&src, &low_kb()).unwrap();
        assert_matches_graph(&a.ocg, &parse_dot(&ocg_to_dot(&a.ocg)));
        let cfg = parse_dot(&cfg_to_dot(&a.cfg));
        let backs = cfg.edges.iter().filter(|(_, _, a)| a.get("label").map(String::as_str) == Some("back")).count();
        assert_eq!(backs, a.cfg.back_edges().count());
    }
}

#[test]
fn uib_has_two_disjoint_clusters() {
    let a = analyze(entry("uib").unwrap().source, &low_kb()).unwrap();
    let dot = parse_dot(&ocg_to_dot(&a.ocg));
    assert_eq!(op_nodes(&dot), 6);
    assert_eq!(dot.root.clusters.len(), 2);
    assert!(dot.root.clusters.iter().all(|c| c.clusters.is_empty() && c.nodes.len() == 2));
    let (x, y) = (&dot.root.clusters[0].nodes, &dot.root.clusters[1].nodes);
    assert!(x.is_disjoint(y));
}

#[test]
fn task3_clusters_nest() {
    let ast = cogload::dsl::parse_program(entry("revenue_task3").unwrap().source).unwrap();
    let (_, flat) = front_end(&ast).unwrap();
    let dot = parse_dot(&graph_to_dot(&flat, "flat"));
    assert_eq!(dot.root.clusters.len(), 1);
    let outer = &dot.root.clusters[0];
    assert!(outer.nodes.is_empty());
    assert_eq!(outer.clusters.len(), 1);
    assert_eq!(outer.clusters[0].nodes.len(), 2);
}

#[test]
fn empty_program_links_start_to_end() {
    let dot = parse_dot(&graph_to_dot(&OperationGraph::default(), "empty"));
    assert_eq!(op_nodes(&dot), 0);
    assert_eq!(dot.edges.len(), 1);
}
