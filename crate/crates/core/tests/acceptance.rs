//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! elapsed time against its time limit; the process fails if any does.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};

use traceforge::baseline::{index_hash, ConfigurationIndex};
use traceforge::change::{compute_impact, resolve_item, ChangeRequest, CrState, ImpactConfig, ItemStatus, Resolution};
use traceforge::compliance::{check_coverage, default_ruleset, DalLevel, GapKind};
use traceforge::events::read_log;
use traceforge::fixtures::{self, g1_graph, id};
use traceforge::graph::{LinkKey, NodeInput, TraceGraph, UpsertOutcome};
use traceforge::ingest::{decode_utf8, merge_into_graph, parse_export, Diagnostic, IngestFormat, Location};
use traceforge::model::{ArtifactId, ArtifactKind, LinkType};
use traceforge::project::{replay, Store};
use traceforge::time::{SteppingClock, Timestamp};

use common::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn impact_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x1a);
    let mut items = 0;
    for case in 0..200 {
        let g = random_graph(&mut rng, 50, 120);
        let active: Vec<ArtifactId> = g.active_nodes().map(|n| n.id.clone()).collect();
        if active.is_empty() {
            continue;
        }
        let k = rng.gen_range(1..=3.min(active.len()));
        let seeds: BTreeSet<ArtifactId> = active.choose_multiple(&mut rng, k).cloned().collect();
        let types = random_types(&mut rng);
        let depth = rng.gen_bool(0.5).then(|| rng.gen_range(0..5));
        let config = ImpactConfig {
            types: types.clone(),
            max_depth: depth,
        };
        let set = compute_impact(&g, &seeds, &config).map_err(|e| e.to_string())?;
        let got: BTreeMap<ArtifactId, u32> = set.items.iter().map(|i| (i.node.clone(), i.distance)).collect();
        let want = distance_oracle(&g, &seeds, &types, depth);
        ensure!(got == want, "case {case}: impact {got:?} != oracle {want:?}");
        for item in &set.items {
            ensure!(item.status == ItemStatus::Pending, "case {case}: {} not Pending", item.node);
            ensure!(item.path.len() as u32 == item.distance, "case {case}: path length of {}", item.node);
            let mut from: Vec<&ArtifactId> = seeds.iter().collect();
            for step in &item.path {
                let joined = g.links().any(|l| {
                    l.link_type == step.link_type
                        && types.contains(&l.link_type)
                        && from.iter().any(|&p| {
                            (l.from == *p && l.to == step.node) || (l.to == *p && l.from == step.node)
                        })
                });
                ensure!(joined, "case {case}: no {} link into {} on the path of {}", step.link_type, step.node, item.node);
                from = vec![&step.node];
            }
            let end = item.path.last().map_or(&item.node, |s| &s.node);
            ensure!(end == &item.node, "case {case}: path of {} ends at {end}", item.node);
            if item.path.is_empty() {
                ensure!(seeds.contains(&item.node), "case {case}: {} has no path", item.node);
            }
        }
        items += set.items.len();
    }
    Ok(format!("200 graphs, {items} items"))
}

type GapKey = (ArtifactId, String, GapKind);

/// Node x rule checker with the default rule table written out by hand.
fn coverage_oracle(g: &TraceGraph, dal: DalLevel) -> BTreeSet<GapKey> {
    use ArtifactKind::*;
    // (rule, subject, outgoing, type, derived exempt, levels)
    let table = [
        ("R1", HighLevelRequirement, true, LinkType::Satisfies, true, "ABCD"),
        ("R2", LowLevelRequirement, true, LinkType::Refines, true, "ABC"),
        ("R3", LowLevelRequirement, false, LinkType::Implements, false, "ABC"),
        ("R4", HighLevelRequirement, false, LinkType::Verifies, false, "ABCD"),
        ("R5", LowLevelRequirement, false, LinkType::Verifies, false, "AB"),
        ("R6", TestCase, false, LinkType::Records, false, "ABCD"),
        ("R7", SourceUnit, true, LinkType::Implements, false, "ABC"),
    ];
    let letter = dal.letter();
    let mut out = BTreeSet::new();
    for node in g.nodes().filter(|n| n.is_active()) {
        for (rule, kind, outgoing, t, exempt, levels) in table {
            if node.kind != kind || !levels.contains(letter) {
                continue;
            }
            if exempt && node.attributes.get("derived").is_some_and(|v| v == "true") {
                continue;
            }
            let n = g
                .links()
                .filter(|l| l.link_type == t && if outgoing { l.from == node.id } else { l.to == node.id })
                .count();
            if n == 0 {
                out.insert((node.id.clone(), rule.to_string(), GapKind::MissingLink));
            }
        }
    }
    if "ABCD".contains(letter) {
        for l in g.links().filter(|l| l.suspect) {
            out.insert((l.from.clone(), "SUSPECT".to_string(), GapKind::SuspectLink));
        }
    }
    out
}

fn gap_keys(g: &TraceGraph, dal: DalLevel) -> Vec<GapKey> {
    check_coverage(g, dal, &default_ruleset())
        .gaps
        .into_iter()
        .map(|gap| (gap.node, gap.rule, gap.kind))
        .collect()
}

fn coverage_oracle_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x2b);
    let mut gaps = 0;
    for case in 0..100 {
        let g = random_graph(&mut rng, 30, 60);
        for dal in DalLevel::ALL {
            let got = gap_keys(&g, dal);
            // suspect gaps may repeat per source node; compare as sets, and
            // missing-link gaps must not repeat at all
            let missing: Vec<_> = got.iter().filter(|k| k.2 == GapKind::MissingLink).collect();
            let unique: BTreeSet<_> = missing.iter().collect();
            ensure!(missing.len() == unique.len(), "case {case} DAL {dal}: duplicate gaps");
            let got: BTreeSet<GapKey> = got.into_iter().collect();
            let want = coverage_oracle(&g, dal);
            ensure!(got == want, "case {case} DAL {dal}: {got:?} != {want:?}");
            gaps += got.len();
        }
    }
    let g1 = g1_graph();
    let a = gap_keys(&g1, DalLevel::A);
    let expected = vec![
        (id("HLR-2"), "R4".to_string(), GapKind::MissingLink),
        (id("LLR-1"), "R5".to_string(), GapKind::MissingLink),
    ];
    ensure!(a == expected, "G1 at DAL A: {a:?}");
    ensure!(gap_keys(&g1, DalLevel::E).is_empty(), "G1 at DAL E has gaps");
    Ok(format!("100 graphs x 5 levels, {gaps} gaps; G1 A=2 E=0"))
}

fn dal_monotonicity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x3c);
    let order = [DalLevel::E, DalLevel::D, DalLevel::C, DalLevel::B, DalLevel::A];
    for case in 0..300 {
        let g = random_graph(&mut rng, 40, 80);
        let reports: Vec<BTreeSet<_>> = order
            .iter()
            .map(|&d| check_coverage(&g, d, &default_ruleset()).gaps.into_iter().collect())
            .collect();
        for w in reports.windows(2).zip(order.windows(2)) {
            let (sets, dals) = w;
            ensure!(
                sets[0].is_subset(&sets[1]),
                "case {case}: gaps({}) not within gaps({})",
                dals[0],
                dals[1]
            );
        }
    }
    Ok("300 graphs, E within D within C within B within A".into())
}

/// Inserts the plan's nodes and links in random order, then applies the
/// same content edits in random order.
fn build_shuffled(plan: &Plan, edits: &[usize], rng: &mut StdRng) -> TraceGraph {
    let mut nodes = plan.nodes.clone();
    nodes.shuffle(rng);
    let mut links = plan.links.clone();
    links.shuffle(rng);
    let mut edits = edits.to_vec();
    edits.shuffle(rng);
    let mut g = TraceGraph::new();
    for n in nodes {
        g.upsert_node(n).unwrap();
    }
    for (f, t, to) in links {
        g.add_link(&f, &to, t).unwrap();
    }
    for i in edits {
        let n = &plan.nodes[i];
        g.upsert_node(edited(n, 1)).unwrap();
    }
    g
}

fn from_nodes(index: &str) -> &str {
    &index[index.find("[NODES]").expect("nodes marker")..]
}

fn baseline_determinism() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x4d);
    for case in 0..50 {
        let plan = random_plan(&mut rng, 50, 120);
        let edits: Vec<usize> = (0..plan.nodes.len()).filter(|_| rng.gen_bool(0.2)).collect();
        let a = build_shuffled(&plan, &edits, &mut rng);
        let b = build_shuffled(&plan, &edits, &mut rng);
        let ia = ConfigurationIndex::of_graph(&a, "p", "first", Timestamp::from_unix(1_700_000_000)).render();
        let ib = ConfigurationIndex::of_graph(&b, "p", "second", Timestamp::from_unix(1_800_000_000)).render();
        ensure!(from_nodes(&ia) == from_nodes(&ib), "case {case}: index bytes differ");
        ensure!(index_hash(&ia) == index_hash(&ib), "case {case}: index hash differs");
        let parsed = ConfigurationIndex::parse(&ia).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(parsed.render() == ia, "case {case}: index does not round trip");
    }
    Ok("50 graph pairs".into())
}

fn suspect_marking() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5e);
    let mut updates = 0;
    let mut cleared_total = 0;
    for case in 0..300 {
        let mut g = random_graph(&mut rng, 30, 80);
        let Some(node) = g.active_nodes().choose(&mut rng).cloned() else {
            continue;
        };
        let incident: BTreeSet<LinkKey> = g
            .links()
            .filter(|l| l.from == node.id || l.to == node.id)
            .map(|l| l.key())
            .collect();
        let before: BTreeMap<LinkKey, bool> = g.links().map(|l| (l.key(), l.suspect)).collect();
        let input = NodeInput {
            body: format!("{} changed", node.body),
            ..NodeInput::new(node.id.clone(), node.kind, node.source)
        };
        let input = NodeInput {
            title: node.title.clone(),
            attributes: node.attributes.clone(),
            ..input
        };
        let out = g.upsert_node(input).map_err(|e| e.to_string())?;
        ensure!(
            out == UpsertOutcome::Updated {
                marked_suspect: incident.len()
            },
            "case {case}: outcome {out:?}, {} incident",
            incident.len()
        );
        for l in g.links() {
            let k = l.key();
            if incident.contains(&k) {
                ensure!(l.suspect, "case {case}: incident {k} not suspect");
            } else {
                ensure!(l.suspect == before[&k], "case {case}: unrelated {k} changed");
            }
        }
        updates += 1;

        let all = ImpactConfig::default();
        let seeds = BTreeSet::from([node.id.clone()]);
        let impact = compute_impact(&g, &seeds, &all).map_err(|e| e.to_string())?;
        let mut cr = ChangeRequest::new("CR-1".into(), "t".into(), String::new(), impact, Timestamp::from_unix(0));
        cr.transition(CrState::Analyzed, &g, Timestamp::from_unix(1)).map_err(|e| e.to_string())?;
        let before: BTreeMap<LinkKey, bool> = g.links().map(|l| (l.key(), l.suspect)).collect();
        let cleared = resolve_item(&mut cr, &mut g, &node.id, Resolution::Resolved, "", Timestamp::from_unix(2))
            .map_err(|e| e.to_string())?;
        let cleared: BTreeSet<LinkKey> = cleared.into_iter().collect();
        ensure!(cleared == incident, "case {case}: cleared {cleared:?} != incident {incident:?}");
        for l in g.links() {
            let k = l.key();
            let want = if incident.contains(&k) { false } else { before[&k] };
            ensure!(l.suspect == want, "case {case}: {k} suspect={} after resolve", l.suspect);
        }
        cleared_total += cleared.len();
    }
    Ok(format!("{updates} updates, {cleared_total} links cleared"))
}

fn replay_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x6f);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = Store::new(tmp.path()).with_clock(Arc::new(SteppingClock::default()));
    let mut events = 0;
    let mut flips = 0;
    for case in 0..100 {
        let name = format!("p{case}");
        let mut p = store.create_project(&name).map_err(|e| e.to_string())?;
        let pool = node_pool(&mut rng);
        for _ in 0..rng.gen_range(5..40) {
            random_op(&mut p, &mut rng, &pool);
        }
        let live_json = p.graph().to_json();
        let live_state = p.state().clone();
        events += p.events().len();
        drop(p);

        let reopened = store.open_project(&name).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(reopened.graph().to_json() == live_json, "case {case}: reopened graph differs");
        ensure!(reopened.state() == &live_state, "case {case}: reopened state differs");
        let replayed = replay(&name, reopened.events()).map_err(|e| e.to_string())?;
        ensure!(replayed.graph.to_json() == live_json, "case {case}: replayed graph differs");
        ensure!(
            store.verify_project(&name).map_err(|e| e.to_string())?.is_ok(),
            "case {case}: clean log fails verification"
        );

        let bytes = std::fs::read(reopened.dir().join("events.log")).map_err(|e| e.to_string())?;
        if bytes.is_empty() {
            continue;
        }
        for _ in 0..20 {
            let mut bad = bytes.clone();
            let at = rng.gen_range(0..bad.len());
            let x: u8 = rng.gen_range(1..=255);
            bad[at] ^= x;
            let detected = match read_log(&bad, false) {
                Err(_) => true,
                Ok(read) => replay(&name, &read.events).is_err(),
            };
            ensure!(detected, "case {case}: flip of byte {at} by {x:#04x} went unnoticed");
            flips += 1;
        }
    }
    Ok(format!("100 sequences, {events} events, {flips} corruptions detected"))
}

fn cr_state_machine_safety() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x70);
    let mut transitions = 0;
    let mut closed = 0;
    for case in 0..1000 {
        let plan = random_plan(&mut rng, 12, 20);
        let mut g = build(&plan);
        let seed = BTreeSet::from([plan.nodes.choose(&mut rng).unwrap().id.clone()]);
        let impact = compute_impact(&g, &seed, &ImpactConfig::default()).map_err(|e| e.to_string())?;
        let mut cr = ChangeRequest::new("CR-1".into(), "t".into(), String::new(), impact, Timestamp::from_unix(0));
        for step in 0..30 {
            let now = Timestamp::from_unix(step);
            let from = cr.state;
            match rng.gen_range(0..10) {
                0..=3 => {
                    let target = *CrState::ALL.choose(&mut rng).unwrap();
                    let ok = cr.transition(target, &g, now).is_ok();
                    if ok {
                        transitions += 1;
                        ensure!(from.can_move_to(target), "case {case}: moved {from} -> {target}");
                        if target == CrState::Closed {
                            closed += 1;
                            let items = cr.impact.as_ref().unwrap().items.iter();
                            for it in items {
                                ensure!(
                                    g.links().all(|l| !(l.suspect && (l.from == it.node || l.to == it.node))),
                                    "case {case}: closed with a suspect link on {}",
                                    it.node
                                );
                            }
                        }
                    } else {
                        ensure!(cr.state == from, "case {case}: failed transition changed state");
                    }
                }
                4..=6 => {
                    let node = cr.impact.as_ref().unwrap().items.choose(&mut rng).map(|i| i.node.clone());
                    if let Some(node) = node {
                        let res = if rng.gen_bool(0.8) { Resolution::Resolved } else { Resolution::Waived };
                        let _ = resolve_item(&mut cr, &mut g, &node, res, "", now);
                    }
                }
                7..=8 => {
                    let n = plan.nodes.choose(&mut rng).unwrap();
                    let _ = g.upsert_node(edited(n, step as u32));
                }
                _ => {
                    let (a, b) = (plan.nodes.choose(&mut rng).unwrap(), plan.nodes.choose(&mut rng).unwrap());
                    if let Some(t) = LinkType::between(a.kind, b.kind) {
                        let _ = g.add_link(&a.id, &b.id, t);
                    }
                }
            }
            if cr.state.is_open() {
                let _ = cr.recompute(&g, now);
            }
            ensure!(cr.state == from || from.can_move_to(cr.state), "case {case}: {from} -> {}", cr.state);
            if cr.state == CrState::Verified {
                ensure!(cr.unresolved_count() == 0, "case {case}: Verified with unresolved items");
            }
        }
    }
    Ok(format!("1000 sequences, {transitions} transitions, {closed} closures"))
}

const FIXTURES: [(IngestFormat, &str); 4] = [
    (IngestFormat::Csv, fixtures::REQUIREMENTS_CSV),
    (IngestFormat::Reqif, fixtures::REQUIREMENTS_REQIF),
    (IngestFormat::Issues, fixtures::ISSUES_JSON),
    (IngestFormat::Vcslog, fixtures::VCS_JSONL),
];

/// Decode, parse and merge, as a project ingest does.
fn ingest_bytes(g: &mut TraceGraph, format: IngestFormat, bytes: &[u8]) -> Vec<Diagnostic> {
    match decode_utf8(bytes) {
        Err(d) => vec![d],
        Ok(text) => {
            let (batch, mut diags) = parse_export(format, text);
            diags.extend(merge_into_graph(g, &batch).diagnostics);
            diags
        }
    }
}

fn locatable(d: &Diagnostic, input: &[u8]) -> bool {
    let lines = input.iter().filter(|&&b| b == b'\n').count() as u64 + 1;
    match &d.location {
        Location::Document => true,
        Location::Line(n) | Location::Row(n) => (1..=lines).contains(n),
        Location::Index(_) => true,
        Location::SpecObject { line, .. } => (1..=lines).contains(&(*line as u64)),
        Location::Record(id) => !id.is_empty(),
    }
}

fn ingest_idempotence_and_totality() -> Outcome {
    // re-ingest: each file alone, and the G1 set together
    for (format, text) in FIXTURES {
        let mut g = TraceGraph::new();
        let first = ingest_bytes(&mut g, format, text.as_bytes());
        ensure!(first.iter().all(|d| d.severity != traceforge::ingest::Severity::Error), "{format:?}: {first:?}");
        let rev = g.graph_revision();
        let (batch, _) = parse_export(format, text);
        let again = merge_into_graph(&mut g, &batch);
        let c = again.counts;
        ensure!(
            c.created == 0 && c.updated == 0 && c.links_created == 0,
            "{format:?} re-ingest changed something: {c:?}"
        );
        ensure!(g.graph_revision() == rev, "{format:?} re-ingest bumped the revision");
    }
    let mut g = TraceGraph::new();
    let g1 = [FIXTURES[0], FIXTURES[2], FIXTURES[3]];
    for (format, text) in g1 {
        ingest_bytes(&mut g, format, text.as_bytes());
    }
    for (format, text) in g1 {
        let (batch, _) = parse_export(format, text);
        let c = merge_into_graph(&mut g, &batch).counts;
        ensure!(c.created == 0 && c.updated == 0 && c.links_created == 0, "G1 {format:?}: {c:?}");
    }

    let mut rng = StdRng::seed_from_u64(0x81);
    let mut inputs = 0;
    let mut diagnostics = 0;
    let is_error = |d: &Diagnostic| d.severity == traceforge::ingest::Severity::Error;
    for (format, text) in FIXTURES {
        let bytes = text.as_bytes();
        // (input, must it produce an error?)
        let mut corpus: Vec<(Vec<u8>, bool)> = (0..bytes.len()).map(|n| (bytes[..n].to_vec(), false)).collect();
        for _ in 0..200 {
            let mut b = bytes.to_vec();
            let at = rng.gen_range(0..=b.len());
            let bad: &[u8] = [&b"\xff"[..], b"\xc3\x28", b"\xe2\x82", b"\xed\xa0\x80"].choose(&mut rng).unwrap();
            b.splice(at..at, bad.iter().copied());
            corpus.push((b, true));
        }
        let lines: Vec<&str> = text.lines().collect();
        for _ in 0..200 {
            // each line is malformed in every format it can be inserted into
            let garbage: &[&str] = match format {
                IngestFormat::Reqif => &["<<<", "</SPEC-OBJECTS>", "<A B=>", "&bogus;"],
                _ => &["<<<,\"\"\"", "{\"unterminated", "][", "<x>,,,,,,,,,,,</y>", "\"open,quote"],
            };
            let garbage = *garbage.choose(&mut rng).unwrap();
            let mut l = lines.clone();
            let at = rng.gen_range(1..=l.len());
            l.insert(at, garbage);
            corpus.push((l.join("\n").into_bytes(), true));
        }
        for (input, must_fail) in corpus {
            let run = catch_unwind(AssertUnwindSafe(|| {
                let mut g = TraceGraph::new();
                ingest_bytes(&mut g, format, &input)
            }));
            let diags = run.map_err(|_| format!("{format:?} parser panicked on {:?}", String::from_utf8_lossy(&input)))?;
            for d in &diags {
                ensure!(locatable(d, &input), "{format:?}: unlocatable {d:?}");
            }
            if must_fail {
                ensure!(
                    diags.iter().any(is_error),
                    "{format:?}: no error for {:?}",
                    String::from_utf8_lossy(&input)
                );
            }
            inputs += 1;
            diagnostics += diags.len();
        }
    }
    Ok(format!("4 fixtures idempotent; {inputs} fuzz inputs, {diagnostics} diagnostics"))
}

fn cli_contract() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let home = tmp.path();
    cli_g1(home);

    let bin = env!("CARGO_BIN_EXE_traceforge");
    let run_bin = |args: &[&str]| {
        std::process::Command::new(bin)
            .arg("--home")
            .arg(home)
            .args(args)
            .output()
            .expect("binary runs")
    };
    let a = run_bin(&["check", "--dal", "A"]);
    ensure!(a.status.code() == Some(1), "check --dal A exited {:?}", a.status.code());
    let text = String::from_utf8_lossy(&a.stdout);
    ensure!(text.contains(": 2 gap(s)"), "check --dal A output: {text}");
    let e = run_bin(&["check", "--dal", "E"]);
    ensure!(e.status.code() == Some(0), "check --dal E exited {:?}", e.status.code());

    let (_, json, _) = cli(home, &["--json", "check", "--dal", "A"]);
    let report: serde_json::Value = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    let gaps: Vec<(String, String)> = report["gaps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| (g["node"].as_str().unwrap().into(), g["rule"].as_str().unwrap().into()))
        .collect();
    ensure!(
        gaps == [("HLR-2".into(), "R4".into()), ("LLR-1".into(), "R5".into())],
        "gaps {gaps:?}"
    );

    let (code, _, err) = cli(home, &["cr", "create", "--title", "boot", "--seed", "HLR-1"]);
    ensure!(code == 0, "cr create: {err}");
    let (code, _, err) = cli(home, &["baseline", "create", "r1"]);
    ensure!(code == 0, "baseline create: {err}");

    let base = "/api/v1/projects/default";
    let pairs: Vec<(Vec<&str>, &str, String, Option<&str>)> = vec![
        (vec!["check", "--dal", "A"], "GET", format!("{base}/coverage?dal=A"), None),
        (vec!["check", "--dal", "E"], "GET", format!("{base}/coverage?dal=E"), None),
        (vec!["nodes"], "GET", format!("{base}/nodes"), None),
        (vec!["nodes", "--kind", "HLR"], "GET", format!("{base}/nodes?kind=HLR"), None),
        (vec!["node", "HLR-1"], "GET", format!("{base}/nodes/HLR-1"), None),
        (
            vec!["impact", "--seed", "HLR-1", "--types", "SATISFIES", "REFINES", "IMPLEMENTS", "VERIFIES"],
            "POST",
            format!("{base}/impact"),
            Some(r#"{"seeds":["HLR-1"],"types":["SATISFIES","REFINES","IMPLEMENTS","VERIFIES"]}"#),
        ),
        (vec!["impact", "--seed", "NO-SUCH"], "POST", format!("{base}/impact"), Some(r#"{"seeds":["NO-SUCH"]}"#)),
        (vec!["cr", "list"], "GET", format!("{base}/crs"), None),
        (vec!["cr", "show", "CR-1"], "GET", format!("{base}/crs/CR-1"), None),
        (vec!["cr", "show", "CR-9"], "GET", format!("{base}/crs/CR-9"), None),
        (vec!["baseline", "list"], "GET", format!("{base}/baselines"), None),
        (vec!["baseline", "show", "BL-1"], "GET", format!("{base}/baselines/BL-1/index"), None),
        (vec!["baseline", "diff", "BL-1", "BL-1"], "GET", format!("{base}/baselines/diff?a=BL-1&b=BL-1"), None),
        (
            vec!["report", "matrix", "--rows", "HLR", "--cols", "SYS", "--types", "SATISFIES"],
            "GET",
            format!("{base}/matrix?rows=HLR&cols=SYS&types=SATISFIES"),
            None,
        ),
        (vec!["export", "--format", "json"], "GET", format!("{base}/export/graph?format=json"), None),
        (vec!["export", "--format", "dot"], "GET", format!("{base}/export/graph?format=dot"), None),
        (vec!["events", "--since", "3"], "GET", format!("{base}/events?since=3"), None),
    ];

    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let app = traceforge::service::router(Store::new(home));
    let mut compared = 0;
    for (args, method, uri, body) in &pairs {
        let mut argv = vec!["--json"];
        argv.extend(args);
        let (_, out, _) = cli(home, &argv);
        let (_, api) = rt.block_on(http(&app, method, uri, *body));
        ensure!(out == api, "{args:?} vs {method} {uri}:\ncli: {out}\napi: {api}");
        compared += 1;
    }
    let (_, csv, _) = cli(home, &["report", "matrix", "--rows", "HLR", "--cols", "SYS", "--types", "SATISFIES"]);
    let (_, api) = rt.block_on(http(&app, "GET", &format!("{base}/matrix.csv?rows=HLR&cols=SYS&types=SATISFIES"), None));
    ensure!(csv == api && csv == "row\\col,SYS-1\nHLR-1,S\nHLR-2,\n", "matrix CSV: {csv:?} vs {api:?}");
    Ok(format!("exit codes 1/0, {} bodies byte-identical", compared + 1))
}

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            name: "impact oracle equivalence",
            limit: Duration::from_secs(10),
            run: impact_oracle,
        },
        Criterion {
            name: "coverage oracle equivalence",
            limit: Duration::from_secs(5),
            run: coverage_oracle_equivalence,
        },
        Criterion {
            name: "DAL monotonicity",
            limit: Duration::from_secs(5),
            run: dal_monotonicity,
        },
        Criterion {
            name: "baseline determinism",
            limit: Duration::from_secs(5),
            run: baseline_determinism,
        },
        Criterion {
            name: "suspect marking",
            limit: Duration::from_secs(5),
            run: suspect_marking,
        },
        Criterion {
            name: "replay equivalence",
            limit: Duration::from_secs(20),
            run: replay_equivalence,
        },
        Criterion {
            name: "CR state machine safety",
            limit: Duration::from_secs(10),
            run: cr_state_machine_safety,
        },
        Criterion {
            name: "ingest idempotence and parser totality",
            limit: Duration::from_secs(20),
            run: ingest_idempotence_and_totality,
        },
        Criterion {
            name: "CLI contract",
            limit: Duration::from_secs(5),
            run: cli_contract,
        },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(c.run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {:?} limit", c.limit)),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:<40} {:>8.2?} (limit {:?})  {}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed,
            c.limit,
            detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
