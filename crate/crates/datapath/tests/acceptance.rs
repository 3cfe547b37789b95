//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit status if any fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use datapath::formats::Topology;
use datapath::{discover, Backend, DiscoveryRequest, Status};
use datapath_core::analyzer::{
    analyze, build_flow_tree, extract_paths, AnalysisError, AnalyzerOptions, FlowTree,
};
use datapath_core::forwarding::flood_config;
use datapath_core::headers::{HeaderSchema, HeaderValue, TrafficType};
use datapath_core::samples::{
    chain, cloned_probe_log, four_switch_plane, gen, solid_path_config, solid_path_log,
};
use datapath_core::simulator::{simulate, Probe};
use datapath_core::testgen::{bounds, bounds_for, suite_for_header, suite_for_type, suite_size};
use datapath_core::topology::{DataPath, DataPlane, NodeId};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Longest finite path seen by any criterion, relative to the bound of its data-plane.
#[derive(Default)]
struct LengthAudit {
    paths: usize,
    violations: Vec<String>,
}

impl LengthAudit {
    fn check<'a>(&mut self, d: &DataPlane, paths: impl IntoIterator<Item = &'a DataPath>) {
        let limit = bounds(d).max_path_length as usize;
        for p in paths {
            self.paths += 1;
            if p.len() > limit {
                self.violations.push(format!("{} > {limit}", p.render(d)));
            }
        }
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rendered(d: &DataPlane, t: &FlowTree) -> Vec<String> {
    extract_paths(t).iter().map(|p| p.render(d)).collect()
}

fn backend_probe(origin: NodeId, header: &HeaderValue) -> Probe {
    Probe {
        uid: "acceptance".into(),
        origin,
        header: header.clone(),
    }
}

fn single_path(audit: &mut LengthAudit) -> Verdict {
    let d = four_switch_plane();
    let cfg = solid_path_config(&d, &HeaderSchema::default_schema());
    let h1 = d.lookup("h1").unwrap();
    let header =
        HeaderValue::from_fields(&HeaderSchema::default_schema(), [("dstTCP", 80)]).unwrap();
    let sim = simulate(&d, &cfg, &backend_probe(h1, &header)).unwrap();
    let log = solid_path_log(&d);
    let same_log = sim
        .log
        .iter()
        .map(|o| (o.node, o.iface, o.t))
        .eq(log.iter().map(|o| (o.node, o.iface, o.t)));

    let mut best = Duration::MAX;
    let mut tree = None;
    for _ in 0..20 {
        let start = Instant::now();
        let t = build_flow_tree(&d, h1, &log);
        best = best.min(start.elapsed());
        tree = Some(t);
    }
    let Ok(tree) = tree.unwrap() else {
        return verdict(false, "analysis failed");
    };
    audit.check(&d, &extract_paths(&tree));
    let paths = rendered(&d, &tree);
    let ok = paths == ["(h1,s1)(s1,s2)(s2,h2)"] && best < Duration::from_millis(1) && same_log;
    verdict(
        ok,
        format!("paths {paths:?}, simulator log matches: {same_log}, {best:?}"),
    )
}

fn cloned_path(audit: &mut LengthAudit) -> Verdict {
    let d = four_switch_plane();
    let h1 = d.lookup("h1").unwrap();
    let Ok(tree) = build_flow_tree(&d, h1, &cloned_probe_log(&d)) else {
        return verdict(false, "analysis failed");
    };
    audit.check(&d, &extract_paths(&tree));
    let name = |i: usize| d.name(tree.node(i).label()).to_owned();
    let mut ti = Vec::new();
    let mut te = Vec::new();
    let mut edges = Vec::new();
    for (i, n) in tree.nodes().iter().enumerate() {
        if let Some(v) = n.ti() {
            ti.push((name(i), v));
        }
        if let Some(v) = n.te() {
            te.push((name(i), v));
        }
        if let Some(p) = n.parent() {
            edges.push((name(p), name(i)));
        }
    }
    ti.sort();
    te.sort_by_key(|x| x.1);
    edges.sort();
    let want_ti = [("s1", 1), ("s2", 4), ("s3", 5)].map(|(a, b)| (a.to_owned(), b));
    let want_te =
        [("s1", 0), ("s2", 2), ("s3", 3), ("h2", 6), ("h3", 7)].map(|(a, b)| (a.to_owned(), b));
    let want_edges = [
        ("h1", "s1"),
        ("s1", "s2"),
        ("s1", "s3"),
        ("s2", "h2"),
        ("s3", "h3"),
    ]
    .map(|(a, b)| (a.to_owned(), b.to_owned()));
    let paths = rendered(&d, &tree);
    let ok = ti == want_ti
        && te == want_te
        && edges == want_edges
        && paths == ["(h1,s1)(s1,s2)(s2,h2)", "(h1,s1)(s1,s3)(s3,h3)"];
    verdict(ok, format!("TI {ti:?} TE {te:?} paths {paths:?}"))
}

/// Tree shape with children as a sorted multiset.
#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Shape(String, Vec<Shape>);

fn shape_of(v: &Value) -> Shape {
    let mut children: Vec<Shape> = v["children"]
        .as_array()
        .into_iter()
        .flatten()
        .map(shape_of)
        .collect();
    children.sort();
    Shape(v["label"].as_str().unwrap_or_default().to_owned(), children)
}

fn leaf(l: &str) -> Shape {
    Shape(l.into(), vec![])
}

fn node(l: &str, mut c: Vec<Shape>) -> Shape {
    c.sort();
    Shape(l.into(), c)
}

fn flooding(audit: &mut LengthAudit) -> Verdict {
    let d = four_switch_plane();
    let schema = HeaderSchema::default_schema();
    let topo = Topology::from_plane(d.clone(), schema.clone());
    let cfg = flood_config(&d, &schema);
    let req = DiscoveryRequest {
        sources: vec!["h1".into()],
        header: Some(Value::String("dstTCP=22".into())),
        ..Default::default()
    };
    let res = match discover(&topo, &req, Backend::Simulate(&cfg), 16) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let [entry] = res.entries.as_slice() else {
        return verdict(false, format!("{} entries", res.entries.len()));
    };
    let tree = serde_json::to_value(&entry.tree).unwrap();
    let got = shape_of(&tree);
    let want = node(
        "h1",
        vec![node(
            "s1",
            vec![
                node(
                    "s2",
                    vec![
                        leaf("h2"),
                        leaf("s3"),
                        node("s4", vec![leaf("h4"), leaf("s3")]),
                    ],
                ),
                node("s3", vec![leaf("h3"), leaf("s4"), leaf("s2")]),
            ],
        )],
    );
    let header = HeaderValue::from_fields(&schema, [("dstTCP", 22)]).unwrap();
    let truth = simulate(&d, &cfg, &backend_probe(d.lookup("h1").unwrap(), &header))
        .unwrap()
        .truth;
    audit.check(&d, &truth);
    let ok = entry.status == Status::Ok && got == want;
    verdict(
        ok,
        format!("{:?}, {} paths", entry.status, entry.paths.len()),
    )
}

struct Trials {
    done: usize,
    mismatches: usize,
    elapsed: Duration,
    deletions: usize,
    emptied: usize,
    deletion_failures: Vec<String>,
}

fn oracle_and_deletions(audit: &mut LengthAudit) -> Trials {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut t = Trials {
        done: 0,
        mismatches: 0,
        elapsed: Duration::ZERO,
        deletions: 0,
        emptied: 0,
        deletion_failures: Vec::new(),
    };
    let start = Instant::now();
    for _ in 0..1000 {
        let trial = gen::loop_free_trial(&mut rng, (2, 6), (1, 6));
        let probe = backend_probe(trial.origin, &trial.header);
        let sim = simulate(&trial.plane, &trial.config, &probe).unwrap();
        t.done += 1;
        audit.check(&trial.plane, &trial.truth.paths);
        let tree = match build_flow_tree(&trial.plane, trial.origin, &sim.log) {
            Ok(tree) => tree,
            Err(_) => {
                t.mismatches += 1;
                continue;
            }
        };
        let found = extract_paths(&tree);
        audit.check(&trial.plane, &found);
        if found != trial.truth.paths || sim.loop_hit {
            t.mismatches += 1;
            continue;
        }

        // an interior switch forwards at least one copy
        if t.deletions < 100 {
            let interior: Vec<NodeId> = tree
                .nodes()
                .iter()
                .filter(|n| trial.plane.is_switch(n.label()) && !n.is_leaf())
                .map(|n| n.label())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if !interior.is_empty() {
                let victim = interior[rng.gen_range(0..interior.len())];
                let damaged = sim.log.without_node(victim);
                let outcome = analyze(
                    &trial.plane,
                    trial.origin,
                    &damaged,
                    AnalyzerOptions::default(),
                );
                // the lone observed switch leaves nothing to analyze
                if damaged.is_empty() {
                    t.emptied += 1;
                    if !matches!(outcome, Err(AnalysisError::NoObservations)) {
                        t.deletion_failures.push(format!(
                            "empty log gave {:?}",
                            outcome.map(|a| a.tree.len())
                        ));
                    }
                    continue;
                }
                t.deletions += 1;
                match outcome {
                    Err(AnalysisError::Disconnected { .. }) => {}
                    other => t.deletion_failures.push(format!(
                        "{:?}",
                        other.map(|a| rendered(&trial.plane, &a.tree))
                    )),
                }
            }
        }
    }
    t.elapsed = start.elapsed();
    t
}

fn loops(audit: &mut LengthAudit) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut ok = 0;
    let mut failures = Vec::new();
    for _ in 0..100 {
        let trial = gen::looping_trial(&mut rng, (2, 6), (2, 6));
        audit.check(&trial.plane, &trial.truth.paths);
        let sim = simulate(
            &trial.plane,
            &trial.config,
            &backend_probe(trial.origin, &trial.header),
        )
        .unwrap();
        audit.check(&trial.plane, &sim.truth);
        match build_flow_tree(&trial.plane, trial.origin, &sim.log) {
            Err(AnalysisError::Loop { edge, .. })
                if sim.loop_hit && trial.truth.loops.contains(&edge) =>
            {
                ok += 1
            }
            other => failures.push(format!(
                "loop_hit {} -> {:?}",
                sim.loop_hit,
                other.map(|t| t.len())
            )),
        }
    }
    verdict(
        ok == 100,
        format!("{ok}/100 {}", failures.first().cloned().unwrap_or_default()),
    )
}

fn bound_values(audit: &LengthAudit) -> Verdict {
    let mut exact = true;
    for v in 2u64..=8 {
        let len = v * (v - 1);
        let mut count = BigUint::from(1u32);
        for _ in 0..len {
            count *= v - 1;
        }
        let b = bounds_for(v);
        exact &= b.max_path_length == len && b.max_path_count == count;
    }
    let d = four_switch_plane();
    let b = bounds(&d);
    let seven: BigUint = "211587613802425391637729361787678676290060193601"
        .parse()
        .unwrap();
    let reference = b.max_path_length == 56 && b.max_path_count == seven;
    let ok = exact && reference && audit.violations.is_empty() && audit.paths > 0;
    verdict(
        ok,
        format!(
            "formula exact for |V| 2..8: {exact}, reference plane (7^56, 56): {reference}, {} paths audited, {} too long",
            audit.paths,
            audit.violations.len()
        ),
    )
}

fn suite_sizes() -> Verdict {
    let d = four_switch_plane();
    let schema = HeaderSchema::default_schema();
    let header = HeaderValue::from_fields(&schema, [("dstTCP", 80)]).unwrap();
    let per_header = suite_for_header(&d, &header).len();

    let pinned = TrafficType::any(&schema)
        .exact("dstIP", 7)
        .and_then(|t| t.exact("srcIP", 9))
        .and_then(|t| t.exact("srcTCP", 1000))
        .unwrap();
    let two_free = pinned.clone().masked("dstTCP", 0, 0xfffc).unwrap();
    let per_type = suite_for_type(&d, &two_free, 16, None)
        .map(|s| s.count())
        .unwrap_or(0);

    // free bits taken from the low end of srcIP and then dstTCP, up to 40 of them
    let mut sizes_ok = true;
    for free in 0u32..=40 {
        let ip_free = free.min(32);
        let tcp_free = free - ip_free;
        let ip_mask = (u64::from(u32::MAX) << ip_free) as u32 as u128;
        let tcp_mask = (0xffffu128 << tcp_free) & 0xffff;
        let t = TrafficType::any(&schema)
            .exact("dstIP", 1)
            .and_then(|t| t.masked("srcIP", 0, ip_mask))
            .and_then(|t| t.masked("dstTCP", 0, tcp_mask))
            .and_then(|t| t.exact("srcTCP", 2))
            .unwrap();
        let want = BigUint::from(4u32) << free as usize;
        sizes_ok &= t.free_bit_count() == free && suite_size(&d, &t) == want;
        if free <= 10 {
            let n = suite_for_type(&d, &t, 16, None)
                .map(|s| s.count())
                .unwrap_or(0);
            sizes_ok &= BigUint::from(n) == want;
        }
    }
    let ok = per_header == 4 && per_type == 16 && sizes_ok;
    verdict(ok, format!("per header {per_header}, 2 free bits {per_type}, sizes up to 40 free bits exact: {sizes_ok}"))
}

fn chain_performance(audit: &mut LengthAudit) -> Verdict {
    let schema = HeaderSchema::default_schema();
    let header = HeaderValue::zeroed(&schema);
    let mut ticks = Vec::new();
    let mut long = None;
    for n in 1..=75 {
        let (d, cfg) = chain(n, &schema);
        let h1 = d.lookup("h1").unwrap();
        let sim = simulate(&d, &cfg, &backend_probe(h1, &header)).unwrap();
        ticks.push(sim.ticks);
        if n == 75 {
            long = Some((d, sim));
        }
    }
    let (d, sim) = long.unwrap();
    let h1 = d.lookup("h1").unwrap();
    let start = Instant::now();
    let tree = build_flow_tree(&d, h1, &sim.log);
    let elapsed = start.elapsed();
    let Ok(tree) = tree else {
        return verdict(false, "analysis failed");
    };
    let paths = extract_paths(&tree);
    audit.check(&d, &paths);
    let slope_two = ticks.windows(2).all(|w| w[1] - w[0] == 2);
    let path_len = paths.iter().next().map_or(0, DataPath::len);
    let ok = elapsed < Duration::from_secs(1) && slope_two && paths.len() == 1 && path_len == 76;
    verdict(
        ok,
        format!(
            "{} observations in {elapsed:?}, path of {path_len} edges, ticks {}..{} with slope 2: {slope_two}",
            sim.log.len(),
            ticks[0],
            ticks[ticks.len() - 1]
        ),
    )
}

fn main() {
    let mut audit = LengthAudit::default();
    let c1 = single_path(&mut audit);
    let c2 = cloned_path(&mut audit);
    let c3 = flooding(&mut audit);
    let trials = oracle_and_deletions(&mut audit);
    let c4 = verdict(
        trials.done == 1000 && trials.mismatches == 0 && trials.elapsed < Duration::from_secs(60),
        format!(
            "{} trials, {} mismatches, {:?}",
            trials.done, trials.mismatches, trials.elapsed
        ),
    );
    let c5 = loops(&mut audit);
    let c6 = verdict(
        trials.deletions == 100 && trials.deletion_failures.is_empty(),
        format!(
            "{}/{} disconnected, {} single-switch deletions left no observations {}",
            trials
                .deletions
                .saturating_sub(trials.deletion_failures.len()),
            trials.deletions,
            trials.emptied,
            trials
                .deletion_failures
                .first()
                .cloned()
                .unwrap_or_default()
        ),
    );
    let c7 = bound_values(&audit);
    let c8 = suite_sizes();
    let c9 = chain_performance(&mut audit);

    let all = [
        ("single path", c1),
        ("cloned path", c2),
        ("flooding case study", c3),
        ("oracle equivalence", c4),
        ("loop detection", c5),
        ("disconnection detection", c6),
        ("path bounds", c7),
        ("suite sizes", c8),
        ("chain performance", c9),
    ];
    let mut failed = 0;
    for (i, (name, v)) in all.iter().enumerate() {
        println!(
            "{} {} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
