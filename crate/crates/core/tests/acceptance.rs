//! One line per acceptance criterion. Exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cogload::abstraction::{abstract_to_fixpoint, compile_patterns, find_matches};
use cogload::corpus::{entries, entry, high_kb, low_kb, shipped_kbs};
use cogload::dsl::{parse_program, pretty};
use cogload::opgraph::{NodeId, OperationGraph, Producer};
use cogload::propgen::{check_determinism, check_monotonicity, gen_kb_extension, gen_program, ProgramGenConfig};
use cogload::scoring::{cognitive_complexity, evaluate_exp, format_symbolic, node_scores, parse_symbolic, round2};
use cogload::{analyze, analyze_ast, front_end};

struct Line {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn secs(d: Duration) -> String {
    format!("{:.3} s", d.as_secs_f64())
}

fn toy_scores() -> Line {
    let cases = [
        ("revenue_task1", "e^2 + e", "e"),
        ("revenue_task2", "e^3 + e^2", "e^2"),
        ("revenue_task3", "e^4 + e^3", "e^3"),
    ];
    let (low, high) = (low_kb(), high_kb());
    let t = Instant::now();
    let mut ok = 0;
    let mut bad = Vec::new();
    for (name, lo, hi) in cases {
        let src = entry(name).unwrap().source;
        for (kb, want) in [(&low, lo), (&high, hi)] {
            let got = analyze(src, kb).map(|a| a.score);
            if got.as_ref().ok() == Some(&parse_symbolic(want).unwrap()) {
                ok += 1;
            } else {
                bad.push(format!("{name}/{}: {:?}", kb.name, got.map(|p| format_symbolic(&p))));
            }
        }
    }
    let elapsed = t.elapsed();
    let task1_low = round2(evaluate_exp(&parse_symbolic("e^2 + e").unwrap()).unwrap());
    let task1_high = round2(evaluate_exp(&parse_symbolic("e").unwrap()).unwrap());
    let numeric = task1_low == 10.11 && task1_high == 2.72;
    Line {
        id: "1",
        title: "toy golden scores",
        pass: ok == 6 && numeric && elapsed < Duration::from_secs(1),
        detail: format!("{ok}/6 exact, task1 {task1_low}/{task1_high}, {} (limit 1 s) {}", secs(elapsed), bad.join("; ")),
    }
}

fn table_scores() -> Line {
    let cases = [
        ("uib", "low_literacy", "2e^4 + 3e^3 + e", 172.17),
        ("uib", "high_literacy", "2e^4 + 3e^3 + e", 172.17),
        ("uuknn", "low_literacy", "2e^4 + 11e^3 + 4e^2", 359.69),
        ("uuknn", "high_literacy", "2e^4 + 6e^3 + 4e^2", 259.27),
    ];
    let kbs = shipped_kbs();
    let mut ok = 0;
    let mut got = Vec::new();
    for (name, kb_name, sym, num) in cases {
        let kb = kbs.iter().find(|k| k.name == kb_name).unwrap();
        let a = analyze(entry(name).unwrap().source, kb).unwrap();
        let value = a.value().unwrap();
        let symbolic = format_symbolic(&a.score);
        if symbolic == sym && (value - num).abs() <= 0.005 + 1e-9 && round2(value) == num {
            ok += 1;
        }
        got.push(format!("{name}/{kb_name} {symbolic} = {:.2}", value));
    }
    Line { id: "2", title: "table golden scores", pass: ok == 4, detail: format!("{ok}/4: {}", got.join("; ")) }
}

fn structural_counts() -> Line {
    let knn = entry("uuknn").unwrap().source;
    let uib = entry("uib").unwrap().source;
    let (low, high) = (low_kb(), high_kb());
    let knn_low = analyze(knn, &low).unwrap().ocg.len();
    let knn_high = analyze(knn, &high).unwrap().ocg.len();
    let uib_ocg = analyze(uib, &low).unwrap().ocg;
    let mut cls: Vec<u32> = node_scores(&uib_ocg).iter().map(|s| s.load).collect();
    cls.sort();
    let pass = knn_low == 17 && knn_high == 12 && uib_ocg.len() == 6 && cls == [1, 3, 3, 3, 4, 4];
    Line {
        id: "3",
        title: "structural counts",
        pass,
        detail: format!("knn low {knn_low}, knn high {knn_high}, uib {} with CL {:?}", uib_ocg.len(), cls),
    }
}

fn monotonicity() -> Line {
    let t = Instant::now();
    let report = check_monotonicity(20240601, 200);
    let elapsed = t.elapsed();
    let held = 200 - report.failures.len();
    let first = report.failures.first().map_or(String::new(), |f| {
        format!(", first counterexample seed {} ({} -> {})", f["seed"], f["score"]["kb"], f["score"]["extended"])
    });
    Line {
        id: "4",
        title: "monotonicity",
        pass: report.passed() && elapsed < Duration::from_secs(30),
        detail: format!("{held}/200 hold, {} (limit 30 s){first}", secs(elapsed)),
    }
}

fn uniqueness() -> Line {
    let report = check_determinism(7, 10);
    let cells = entries().len() * shipped_kbs().len();
    Line {
        id: "5",
        title: "uniqueness under shuffles",
        pass: report.passed(),
        detail: format!("{cells} program x kb cells x 10 shuffles, {} mismatches", report.failures.len()),
    }
}

fn universality() -> Line {
    let kbs = shipped_kbs();
    let mut failures = 0;
    let mut times = Vec::with_capacity(1000);
    for seed in 0..1000u64 {
        let t = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(|| {
            let ast = gen_program(&ProgramGenConfig::with_seed(seed));
            kbs.iter().all(|kb| analyze_ast(ast.clone(), kb).is_ok_and(|a| a.value().is_ok()))
        }))
        .unwrap_or(false);
        times.push(t.elapsed());
        if !ok {
            failures += 1;
        }
    }
    times.sort();
    let median = times[times.len() / 2];
    Line {
        id: "6",
        title: "universality and computability",
        pass: failures == 0 && median < Duration::from_millis(50),
        detail: format!("{}/1000 complete under both KBs, median {:.2} ms (limit 50 ms)", 1000 - failures, median.as_secs_f64() * 1e3),
    }
}

/// Every injective map from pattern nodes to graph nodes that satisfies
/// the match definition, checked directly against the two graphs.
fn brute_force(graph: &OperationGraph, pattern: &OperationGraph) -> BTreeSet<BTreeMap<NodeId, NodeId>> {
    let pnodes: Vec<NodeId> = pattern.nodes.keys().copied().collect();
    let gnodes: Vec<NodeId> = graph.nodes.keys().copied().collect();
    let mut out = BTreeSet::new();
    let mut stack: Vec<Vec<NodeId>> = vec![Vec::new()];
    while let Some(partial) = stack.pop() {
        if partial.len() < pnodes.len() {
            for g in &gnodes {
                if !partial.contains(g) {
                    let mut next = partial.clone();
                    next.push(*g);
                    stack.push(next);
                }
            }
            continue;
        }
        let phi: BTreeMap<NodeId, NodeId> = pnodes.iter().copied().zip(partial.iter().copied()).collect();
        let image: BTreeSet<NodeId> = partial.iter().copied().collect();
        let gp = |id: NodeId| -> BTreeSet<NodeId> { graph.nodes[&id].parents().collect() };
        let pp = |id: NodeId| -> BTreeSet<NodeId> { pattern.nodes[&id].parents().collect() };
        let ops = pnodes.iter().all(|p| pattern.nodes[p].op == graph.nodes[&phi[p]].op);
        let edges = pnodes.iter().all(|p| {
            pnodes.iter().all(|q| pp(*p).contains(q) == gp(phi[p]).contains(&phi[q]))
        });
        let ctx = &graph.nodes[&partial[0]].contexts;
        let uniform = partial.iter().all(|g| &graph.nodes[g].contexts == ctx);
        let closed = pnodes.iter().all(|p| {
            let internal_consumer = pnodes.iter().any(|q| pp(*q).contains(p));
            if !internal_consumer {
                return true;
            }
            let g = phi[p];
            let observed = graph.outputs.iter().any(|(_, ps)| ps.contains(&Producer::Node(g)));
            let consumers_inside =
                graph.nodes.values().filter(|n| n.inputs.contains(&Producer::Node(g))).all(|n| image.contains(&n.id));
            !observed && consumers_inside
        });
        let interface = pnodes.iter().all(|p| {
            let open = pattern.nodes[p].inputs.iter().any(|i| matches!(i, Producer::Source(_)));
            open || graph.nodes[&phi[p]].inputs.iter().all(|i| matches!(i, Producer::Node(n) if image.contains(n)))
        });
        if ops && edges && uniform && closed && interface {
            out.insert(phi);
        }
    }
    out
}

fn matcher_oracle() -> Line {
    let high = high_kb();
    let mut cases = 0;
    let mut agree = 0;
    let mut matches = 0;
    let mut seed = 0u64;
    while cases < 300 && seed < 5000 {
        seed += 1;
        let cfg = ProgramGenConfig { max_statements: 4, seed, ..Default::default() };
        let Ok((_, graph)) = front_end(&gen_program(&cfg)) else { continue };
        if graph.len() > 10 || graph.is_empty() {
            continue;
        }
        let ext = gen_kb_extension(&high, &graph, seed);
        for schema in ext.schemas() {
            let Some(pg) = schema.pattern() else { continue };
            if pg.len() > 4 {
                continue;
            }
            let pattern = compile_patterns(&ext).into_iter().find(|p| p.schema == schema.name).unwrap();
            let order = pg.topo_order().unwrap();
            let found: BTreeSet<BTreeMap<NodeId, NodeId>> = find_matches(&graph, &pattern)
                .into_iter()
                .map(|m| order.iter().copied().zip(m.embedding).collect())
                .collect();
            let oracle = brute_force(&graph, &pg);
            cases += 1;
            matches += oracle.len();
            if found == oracle {
                agree += 1;
            }
        }
    }
    Line {
        id: "7",
        title: "matcher oracle",
        pass: cases > 0 && agree == cases,
        detail: format!("{agree}/{cases} (graph, pattern) pairs agree, {matches} embeddings in total"),
    }
}

fn trip_count_independence() -> Line {
    let mut ok = 0;
    let mut total = 0;
    for e in entries() {
        let ast = parse_program(e.source).unwrap();
        let mut doubled = ast.clone();
        for d in &mut doubled.declarations {
            d.size = d.size.map(|n| n * 2);
        }
        let doubled = parse_program(&pretty(&doubled)).unwrap();
        for kb in shipped_kbs() {
            total += 1;
            let a = analyze_ast(ast.clone(), &kb).unwrap();
            let b = analyze_ast(doubled.clone(), &kb).unwrap();
            if a.ocg.canonical_form() == b.ocg.canonical_form() && a.score == b.score {
                ok += 1;
            }
        }
    }
    Line {
        id: "8",
        title: "trip-count independence",
        pass: ok == total,
        detail: format!("{ok}/{total} program x kb cells unchanged after doubling sizes"),
    }
}

fn abstraction_progress() -> Line {
    let mut runs = 0;
    let mut rewrites = 0;
    let mut bad = 0;
    let mut check = |graph: &OperationGraph, kb: &cogload::SchemaKnowledgeBase| {
        let ocg = abstract_to_fixpoint(graph, kb);
        runs += 1;
        rewrites += ocg.rewrites.len();
        let shrinking = ocg.rewrites.iter().all(|r| r.nodes_after < r.nodes_before);
        let fixpoint = compile_patterns(kb).iter().all(|p| find_matches(&ocg, p).is_empty());
        if !shrinking || ocg.rewrites.len() > graph.len() || !fixpoint || cognitive_complexity(&ocg).node_count() as usize != ocg.len() {
            bad += 1;
        }
    };
    for e in entries() {
        let (_, g) = front_end(&parse_program(e.source).unwrap()).unwrap();
        for kb in shipped_kbs() {
            check(&g, &kb);
        }
    }
    let low = low_kb();
    for seed in 0..300u64 {
        let (_, g) = front_end(&gen_program(&ProgramGenConfig::with_seed(seed))).unwrap();
        let ext = gen_kb_extension(&low, &g, seed);
        check(&g, &ext);
    }
    Line {
        id: "9",
        title: "abstraction progress",
        pass: bad == 0,
        detail: format!("{} of {runs} runs shrink on every rewrite and stop within node count ({rewrites} rewrites)", runs - bad),
    }
}

fn main() -> ExitCode {
    let criteria: [fn() -> Line; 9] = [
        toy_scores,
        table_scores,
        structural_counts,
        monotonicity,
        uniqueness,
        universality,
        matcher_oracle,
        trip_count_independence,
        abstraction_progress,
    ];
    let mut failed = 0;
    for c in criteria {
        let line = c();
        if !line.pass {
            failed += 1;
        }
        println!("[{}] {} {}: {}", if line.pass { "PASS" } else { "FAIL" }, line.id, line.title, line.detail);
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
