//! Random programs and knowledge-base extensions for property checks.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::abstraction::abstract_to_fixpoint;
use crate::corpus::{entries, shipped_kbs};
use crate::dsl::{is_primitive, parse_program, primitive_arity, Ast};
use crate::flowgraph::{build_cfg, verify_structured};
use crate::kb::{kb_subset, load_kb_str, parse_kb, validate_kb, SchemaKnowledgeBase};
use crate::opgraph::{NodeId, OperationGraph, Producer};
use crate::scoring::{cognitive_complexity, evaluate_exp, format_symbolic};
use crate::{analyze_ast, front_end};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgramGenConfig {
    pub max_statements: usize,
    pub max_depth: usize,
    pub max_conjuncts: usize,
    pub seed: u64,
}

impl Default for ProgramGenConfig {
    fn default() -> Self {
        ProgramGenConfig { max_statements: 8, max_depth: 3, max_conjuncts: 2, seed: 0 }
    }
}

impl ProgramGenConfig {
    pub fn with_seed(seed: u64) -> Self {
        ProgramGenConfig { seed, ..Default::default() }
    }
}

const VECTORS: [&str; 3] = ["a", "b", "c"];
const SCALARS: [&str; 2] = ["x", "y"];
const FULL: [&str; 2] = ["C", "D"];
const SUBSETS: [&str; 2] = ["S", "T"];

struct ProgramGen {
    rng: ChaCha8Rng,
    cfg: ProgramGenConfig,
    budget: usize,
    scalars: Vec<String>,
    vectors: Vec<String>,
    loop_vars: Vec<String>,
    fresh: usize,
}

impl ProgramGen {
    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn collection(&mut self) -> &'static str {
        if self.rng.gen_bool(0.5) {
            FULL[self.rng.gen_range(0..FULL.len())]
        } else {
            SUBSETS[self.rng.gen_range(0..SUBSETS.len())]
        }
    }

    fn leaf(&mut self) -> String {
        let roll = self.rng.gen_range(0..10);
        if roll < 4 && !self.loop_vars.is_empty() {
            let v = self.vectors.choose(&mut self.rng).unwrap().clone();
            let i = self.loop_vars.choose(&mut self.rng).unwrap().clone();
            format!("{v}[{i}]")
        } else if roll < 8 {
            self.scalars.choose(&mut self.rng).unwrap().clone()
        } else {
            self.rng.gen_range(1..10).to_string()
        }
    }

    fn expr(&mut self, depth: usize) -> String {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.leaf();
        }
        match self.rng.gen_range(0..10) {
            0..=5 => {
                let op = ["+", "-", "*", "/"].choose(&mut self.rng).unwrap();
                let (l, r) = (self.expr(depth - 1), self.expr(depth - 1));
                format!("({l} {op} {r})")
            }
            6 | 7 => {
                let f = ["sqrt", "square", "abs"].choose(&mut self.rng).unwrap();
                format!("{f}({})", self.expr(depth - 1))
            }
            8 => format!("-{}", self.leaf()),
            _ => {
                let args: Vec<String> = (0..3).map(|_| self.expr(depth - 1)).collect();
                format!("broadcast_subtract({})", args.join(", "))
            }
        }
    }

    fn conditions(&mut self) -> String {
        let n = self.rng.gen_range(1..=self.cfg.max_conjuncts.max(1));
        let conds: Vec<String> = (0..n)
            .map(|_| {
                let op = ["<", "<=", ">", ">=", "==", "!="].choose(&mut self.rng).unwrap();
                let (l, r) = (self.leaf(), self.leaf());
                format!("{l} {op} {r}")
            })
            .collect();
        conds.join(" and ")
    }

    fn block(&mut self, depth: usize, indent: usize, max: usize, out: &mut String) {
        let n = self.rng.gen_range(1..=max.max(1));
        for _ in 0..n {
            if self.budget == 0 {
                break;
            }
            self.statement(depth, indent, out);
        }
    }

    fn statement(&mut self, depth: usize, indent: usize, out: &mut String) {
        self.budget -= 1;
        let pad = "  ".repeat(indent);
        let nested = depth < self.cfg.max_depth && self.budget > 0;
        let roll = self.rng.gen_range(0..20);
        if roll < 8 || (!nested && roll >= 13) {
            let value = self.expr(2);
            if !self.loop_vars.is_empty() && self.rng.gen_bool(0.4) {
                let t = self.name("w");
                let i = self.loop_vars.last().unwrap().clone();
                out.push_str(&format!("{pad}{t}[{i}] = {value}\n"));
                self.vectors.push(t);
            } else {
                let t = self.name("v");
                out.push_str(&format!("{pad}{t} = {value}\n"));
                self.scalars.push(t);
            }
        } else if roll < 13 {
            let t = self.name("v");
            let i = self.name("i");
            let coll = self.collection();
            let reducer = if self.rng.gen_bool(0.8) { "sum" } else { "average" };
            self.loop_vars.push(i.clone());
            let filter = if self.rng.gen_bool(0.4) { format!(" where {}", self.conditions()) } else { String::new() };
            let body = self.expr(2);
            self.loop_vars.pop();
            out.push_str(&format!("{pad}{t} = {reducer} over {i} in {coll}{filter} of {body}\n"));
            self.scalars.push(t);
        } else if roll < 17 {
            let i = self.name("i");
            let coll = self.collection();
            self.loop_vars.push(i.clone());
            let filter = if self.rng.gen_bool(0.4) { format!("where {} ", self.conditions()) } else { String::new() };
            out.push_str(&format!("{pad}for {i} in {coll} {filter}{{\n"));
            self.block(depth + 1, indent + 1, 3, out);
            self.loop_vars.pop();
            out.push_str(&format!("{pad}}}\n"));
        } else {
            let cond = self.conditions();
            out.push_str(&format!("{pad}if {cond} {{\n"));
            self.block(depth + 1, indent + 1, 2, out);
            if self.budget > 0 && self.rng.gen_bool(0.5) {
                out.push_str(&format!("{pad}}} else {{\n"));
                self.block(depth + 1, indent + 1, 2, out);
            }
            out.push_str(&format!("{pad}}}\n"));
        }
    }
}

/// Source text of a random structured program.
pub fn gen_source(config: &ProgramGenConfig) -> String {
    let mut g = ProgramGen {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        cfg: *config,
        budget: config.max_statements.max(1),
        scalars: SCALARS.iter().map(|s| s.to_string()).collect(),
        vectors: VECTORS.iter().map(|s| s.to_string()).collect(),
        loop_vars: Vec::new(),
        fresh: 0,
    };
    let mut out = format!(
        "input vector {}\ninput scalar {}\ncollection {}\nsubset {}\n\n",
        VECTORS.join(", "),
        SCALARS.join(", "),
        FULL.join(", "),
        SUBSETS.join(", ")
    );
    g.block(0, 0, config.max_statements, &mut out);
    let defined: Vec<String> = g.scalars.iter().filter(|s| s.starts_with('v')).cloned().collect();
    if !defined.is_empty() {
        let k = g.rng.gen_range(1..=defined.len().min(2));
        let outputs: Vec<&String> = defined.iter().rev().take(k).collect();
        out.push_str(&format!("\noutput {}\n", outputs.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")));
    }
    out
}

/// A random program that passes validation.
pub fn gen_program(config: &ProgramGenConfig) -> Ast {
    let src = gen_source(config);
    parse_program(&src).unwrap_or_else(|e| panic!("generated program is invalid: {e}\n{src}"))
}

/// Connected, context-uniform node sets of 2..=4 nodes, sampled by growth.
fn sample_fragment(graph: &OperationGraph, rng: &mut ChaCha8Rng) -> Option<Vec<NodeId>> {
    let ids: Vec<NodeId> = graph.nodes.keys().copied().collect();
    let &seed = ids.choose(rng)?;
    let contexts = &graph.nodes[&seed].contexts;
    let target = rng.gen_range(2..=4);
    let mut chosen = vec![seed];
    while chosen.len() < target {
        let frontier: BTreeSet<NodeId> = chosen
            .iter()
            .flat_map(|&id| graph.parents(id).into_iter().chain(graph.consumers(id)))
            .filter(|n| !chosen.contains(n) && &graph.nodes[n].contexts == contexts)
            .collect();
        let frontier: Vec<NodeId> = frontier.into_iter().collect();
        match frontier.choose(rng) {
            Some(&n) => chosen.push(n),
            None => break,
        }
    }
    (chosen.len() >= 2).then_some(chosen)
}

/// Decomposition text for `nodes`, with placeholders for outside inputs.
fn fragment_text(
    graph: &OperationGraph,
    nodes: &[NodeId],
    signatures: &HashMap<String, usize>,
) -> Option<(Vec<String>, String)> {
    let order: Vec<NodeId> = graph.topo_order()?.into_iter().filter(|n| nodes.contains(n)).collect();
    let var = |id: NodeId| format!("t{}", order.iter().position(|&o| o == id).unwrap());
    let mut params = Vec::new();
    let mut lines = Vec::new();
    for (k, &id) in order.iter().enumerate() {
        let n = &graph.nodes[&id];
        let internal: Vec<String> = n.parents().filter(|p| nodes.contains(p)).map(var).collect();
        let open = n.inputs.iter().any(|p| !matches!(p, Producer::Node(q) if nodes.contains(q)));
        let mut args = internal;
        match primitive_arity(&n.op) {
            Some(arity) => {
                if args.len() > arity {
                    return None;
                }
                if open {
                    if args.len() < arity {
                        params.push(format!("scalar p{k}"));
                        args.push(format!("p{k}"));
                    } else {
                        params.push(format!("vector q{k}"));
                        let last = args.pop().unwrap();
                        args.push(format!("q{k}[{last}]"));
                    }
                }
                while args.len() < arity {
                    args.push("1".into());
                }
            }
            None => {
                if open || args.is_empty() {
                    params.push(format!("scalar p{k}"));
                    args.push(format!("p{k}"));
                }
                if let Some(&arity) = signatures.get(&n.op) {
                    if args.len() > arity {
                        return None;
                    }
                    while args.len() < arity {
                        args.push("1".into());
                    }
                }
            }
        }
        lines.push(format!("  t{k} = {}({})", n.op, args.join(", ")));
    }
    Some((params, lines.join("\n")))
}

/// Extends `kb` by one to three schemas whose decompositions are fragments
/// of `graph` (falling back to chains of known operations when the graph has
/// no usable fragment). The result always contains `kb`.
pub fn gen_kb_extension(kb: &SchemaKnowledgeBase, graph: &OperationGraph, seed: u64) -> SchemaKnowledgeBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wanted = rng.gen_range(1..=3);
    let mut current = kb.clone();
    let existing: BTreeSet<String> =
        kb.schemas().iter().filter_map(|s| s.pattern()).map(|p| p.canonical_form()).collect();
    let mut seen = existing;
    let signatures = kb.signatures();
    let mut added = 0;
    for attempt in 0..200 {
        if added == wanted {
            break;
        }
        let fragment = if attempt < 150 { sample_fragment(graph, &mut rng) } else { None };
        let text = match fragment.and_then(|f| fragment_text(graph, &f, &signatures)) {
            Some(t) => t,
            None => fallback_fragment(kb, &mut rng),
        };
        let (params, body) = text;
        let name = format!("gen_{seed}_{added}");
        let schema_text = format!("schema {name}({}) -> scalar decomposes {{\n{body}\n}}\n", params.join(", "));
        let candidate_text = format!("{}{schema_text}", current.to_text());
        let Ok(parsed) = parse_kb(&candidate_text) else { continue };
        if !validate_kb(&parsed).is_empty() {
            continue;
        }
        let Ok(loaded) = load_kb_str(&candidate_text) else { continue };
        let Some(pattern) = loaded.get(&name).and_then(|s| s.pattern()) else { continue };
        // An extension identical to a known decomposition is regenerated.
        if !seen.insert(pattern.canonical_form()) {
            continue;
        }
        current = loaded;
        added += 1;
    }
    SchemaKnowledgeBase::new(format!("{}_ext", kb.name), current.schemas().to_vec())
}

fn fallback_fragment(kb: &SchemaKnowledgeBase, rng: &mut ChaCha8Rng) -> (Vec<String>, String) {
    let ops: Vec<&str> = kb
        .schemas()
        .iter()
        .filter(|s| s.decomposition.is_none() && is_primitive(&s.name))
        .map(|s| s.name.as_str())
        .collect();
    let ops = if ops.is_empty() { vec!["add", "mul"] } else { ops };
    let len = rng.gen_range(2..=3);
    let mut params = Vec::new();
    let mut lines = Vec::new();
    for k in 0..len {
        let op = *ops.choose(rng).unwrap();
        let arity = primitive_arity(op).unwrap_or(2);
        let mut args = Vec::new();
        if k > 0 {
            args.push(format!("t{}", k - 1));
        }
        while args.len() < arity {
            params.push(format!("scalar p{k}_{}", args.len()));
            args.push(format!("p{k}_{}", args.len()));
        }
        lines.push(format!("  t{k} = {op}({})", args.join(", ")));
    }
    (params, lines.join("\n"))
}

/// Result of one property run.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub property: &'static str,
    pub iterations: usize,
    pub failures: Vec<Value>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn counterexample(&self) -> Value {
        json!({ "property": self.property, "iterations": self.iterations, "failures": self.failures })
    }
}

/// Growing the KB never raises the score.
pub fn check_monotonicity(seed: u64, iterations: usize) -> CheckReport {
    let kbs = shipped_kbs();
    let mut failures = Vec::new();
    for k in 0..iterations {
        let s = seed.wrapping_add(k as u64);
        let cfg = ProgramGenConfig::with_seed(s);
        let ast = gen_program(&cfg);
        let base = &kbs[k % kbs.len()];
        let Ok((_, flat)) = front_end(&ast) else {
            failures.push(json!({ "seed": s, "program": crate::dsl::pretty(&ast), "error": "front end failed" }));
            continue;
        };
        let ext = gen_kb_extension(base, &flat, s);
        let (Ok(a), Ok(b)) = (analyze_ast(ast.clone(), base), analyze_ast(ast.clone(), &ext)) else {
            failures.push(json!({ "seed": s, "program": crate::dsl::pretty(&ast), "error": "pipeline failed" }));
            continue;
        };
        let (va, vb) = (evaluate_exp(&a.score).unwrap_or(f64::NAN), evaluate_exp(&b.score).unwrap_or(f64::NAN));
        if !kb_subset(base, &ext) || !(va >= vb) {
            let added: Vec<String> =
                ext.schemas().iter().filter(|s| !base.contains(&s.name)).map(|s| s.to_text()).collect();
            failures.push(json!({
                "seed": s,
                "program": crate::dsl::pretty(&ast),
                "kb": base.name,
                "extension": added,
                "score": { "kb": format_symbolic(&a.score), "extended": format_symbolic(&b.score) },
                "numeric": { "kb": va, "extended": vb },
            }));
        }
    }
    CheckReport { property: "monotonicity", iterations, failures }
}

fn shuffled_kb_text(kb: &SchemaKnowledgeBase, rng: &mut ChaCha8Rng) -> String {
    let mut blocks: Vec<String> = kb.schemas().iter().map(|s| s.to_text()).collect();
    blocks.shuffle(rng);
    format!("[kb {}]\n\n{}", kb.name, blocks.join(""))
}

/// Node numbering and KB file order do not change the result.
pub fn check_determinism(seed: u64, shuffles: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for e in entries() {
        let ast = parse_program(e.source).expect("corpus parses");
        let Ok((_, flat)) = front_end(&ast) else { continue };
        for kb in shipped_kbs() {
            let reference = abstract_to_fixpoint(&flat, &kb);
            let (form, score) = (reference.canonical_form(), cognitive_complexity(&reference));
            for k in 0..shuffles {
                let kb2 = load_kb_str(&shuffled_kb_text(&kb, &mut rng)).expect("shuffled KB loads");
                let g = flat.shuffled(rng.gen());
                let ocg = abstract_to_fixpoint(&g, &kb2);
                let (form2, score2) = (ocg.canonical_form(), cognitive_complexity(&ocg));
                if form2 != form || score2 != score {
                    failures.push(json!({
                        "program": e.name, "kb": kb.name, "shuffle": k,
                        "expected": { "form": form, "score": format_symbolic(&score) },
                        "actual": { "form": form2, "score": format_symbolic(&score2) },
                    }));
                }
            }
        }
    }
    CheckReport { property: "determinism", iterations: shuffles, failures }
}

/// Every generated program yields a structured control flow graph.
pub fn check_structured(seed: u64, iterations: usize) -> CheckReport {
    let mut failures = Vec::new();
    for k in 0..iterations {
        let s = seed.wrapping_add(k as u64);
        let ast = gen_program(&ProgramGenConfig::with_seed(s));
        let report = verify_structured(&build_cfg(&ast));
        if !report.structured {
            failures.push(json!({ "seed": s, "program": crate::dsl::pretty(&ast), "diagnostics": report.diagnostics }));
        }
    }
    CheckReport { property: "structured", iterations, failures }
}
