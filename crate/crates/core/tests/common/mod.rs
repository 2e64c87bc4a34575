#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;

use traceforge::change::{CrState, ImpactConfig, Resolution};
use traceforge::fixtures;
use traceforge::graph::{NodeInput, TraceGraph};
use traceforge::ingest::IngestFormat;
use traceforge::project::Project;
use traceforge::model::{ArtifactId, ArtifactKind, LinkType, Source};

pub fn node_id(kind: ArtifactKind, n: usize) -> ArtifactId {
    let s = match kind {
        ArtifactKind::SourceUnit => format!("SRC:src/f{n}.c"),
        k => format!("{}-{n}", k.code()),
    };
    ArtifactId::new(&s).unwrap()
}

pub fn random_node(rng: &mut StdRng, n: usize) -> NodeInput {
    let kind = *ArtifactKind::ALL.choose(rng).unwrap();
    let mut node = NodeInput::new(node_id(kind, n), kind, Source::Manual)
        .title(format!("t{}", rng.gen_range(0..4)))
        .body(format!("b{}", rng.gen_range(0..4)));
    if kind.is_requirement() && rng.gen_bool(0.3) {
        node = node.attr("derived", "true");
    }
    node
}

/// A node with the same id and kind but different content.
pub fn edited(node: &NodeInput, rev: u32) -> NodeInput {
    node.clone().body(format!("{}~{rev}", node.body))
}

/// Nodes plus every matrix-legal link candidate among them, sampled.
pub struct Plan {
    pub nodes: Vec<NodeInput>,
    pub links: Vec<(ArtifactId, LinkType, ArtifactId)>,
}

pub fn random_plan(rng: &mut StdRng, max_nodes: usize, max_links: usize) -> Plan {
    let n = rng.gen_range(1..=max_nodes);
    let nodes: Vec<NodeInput> = (0..n).map(|i| random_node(rng, i)).collect();
    let mut candidates = Vec::new();
    for a in &nodes {
        for b in &nodes {
            if a.id != b.id {
                if let Some(t) = LinkType::between(a.kind, b.kind) {
                    candidates.push((a.id.clone(), t, b.id.clone()));
                }
            }
        }
    }
    candidates.shuffle(rng);
    let k = rng.gen_range(0..=max_links.min(candidates.len()));
    candidates.truncate(k);
    Plan { nodes, links: candidates }
}

pub fn build(plan: &Plan) -> TraceGraph {
    let mut g = TraceGraph::new();
    for n in &plan.nodes {
        g.upsert_node(n.clone()).unwrap();
    }
    for (f, t, to) in &plan.links {
        g.add_link(f, to, *t).unwrap();
    }
    g
}

/// A random graph with some content updates (suspect links) and some
/// tombstones.
pub fn random_graph(rng: &mut StdRng, max_nodes: usize, max_links: usize) -> TraceGraph {
    let plan = random_plan(rng, max_nodes, max_links);
    let mut g = build(&plan);
    for (i, n) in plan.nodes.iter().enumerate() {
        if rng.gen_bool(0.15) {
            g.upsert_node(edited(n, i as u32)).unwrap();
        }
    }
    for n in &plan.nodes {
        if rng.gen_bool(0.05) {
            g.remove_node(&n.id).unwrap();
        }
    }
    g
}

pub fn random_types(rng: &mut StdRng) -> BTreeSet<LinkType> {
    loop {
        let s: BTreeSet<LinkType> = LinkType::ALL.into_iter().filter(|_| rng.gen_bool(0.6)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

/// Shortest undirected distances from `seeds` over links of `types`,
/// relaxed over the plain link list until nothing changes.
pub fn distance_oracle(
    g: &TraceGraph,
    seeds: &BTreeSet<ArtifactId>,
    types: &BTreeSet<LinkType>,
    max_depth: Option<u32>,
) -> BTreeMap<ArtifactId, u32> {
    let edges: Vec<(&ArtifactId, &ArtifactId)> = g
        .links()
        .filter(|l| types.contains(&l.link_type))
        .map(|l| (&l.from, &l.to))
        .collect();
    let mut dist: BTreeMap<ArtifactId, u32> = seeds.iter().map(|s| (s.clone(), 0)).collect();
    loop {
        let mut changed = false;
        for &(a, b) in &edges {
            for (u, v) in [(a, b), (b, a)] {
                let Some(&du) = dist.get(u) else { continue };
                if max_depth.is_some_and(|m| du >= m) {
                    continue;
                }
                if dist.get(v).is_none_or(|&dv| du + 1 < dv) {
                    dist.insert(v.clone(), du + 1);
                    changed = true;
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/g1").join(name)
}

/// Runs the CLI in-process against `home`. Returns (exit code, stdout, stderr).
pub fn cli(home: &Path, args: &[&str]) -> (u8, String, String) {
    let mut argv = vec!["traceforge".to_string(), "--home".into(), home.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = traceforge::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Loads the G1 fixture into project "default" through the CLI.
pub fn cli_g1(home: &Path) {
    assert_eq!(cli(home, &["init"]).0, 0);
    for (format, file) in [("csv", "requirements.csv"), ("issues", "issues.json"), ("vcslog", "vcs.jsonl")] {
        let path = fixture_path(file);
        let (code, _, err) = cli(home, &["ingest", "--format", format, path.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
}

/// One in-process HTTP round trip. Returns (status, body).
pub async fn http(app: &axum::Router, method: &str, uri: &str, body: Option<&str>) -> (u16, String) {
    use tower::ServiceExt;
    let req = axum::http::Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(axum::body::Body::from(body.unwrap_or("").to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

pub fn proptest_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        failure_persistence: None,
        ..Default::default()
    }
}

/// One random operation against a project; errors are expected and ignored.
pub fn random_op(p: &mut Project, rng: &mut StdRng, pool: &[NodeInput]) {
    let pick = |rng: &mut StdRng| pool.choose(rng).unwrap().clone();
    match rng.gen_range(0..100) {
        0..=29 => {
            let _ = p.upsert_node(pick(rng));
        }
        30..=39 => {
            let n = pick(rng);
            let _ = p.upsert_node(edited(&n, rng.gen_range(0..3)));
        }
        40..=44 => {
            let _ = p.remove_node(&pick(rng).id);
        }
        45..=64 => {
            let (a, b) = (pick(rng), pick(rng));
            if let Some(t) = LinkType::between(a.kind, b.kind) {
                let _ = p.add_link(&a.id, &b.id, t);
            }
        }
        65..=69 => {
            if let Some(k) = p.graph().links().map(|l| l.key()).choose(rng) {
                let _ = p.remove_link(&k);
            }
        }
        70..=77 => {
            let seed = BTreeSet::from([pick(rng).id]);
            let _ = p.create_cr("change", "", &seed, &ImpactConfig::default());
        }
        78..=87 => {
            if let Some(cr) = p.state().crs.iter().map(|c| c.cr_id.clone()).choose(rng) {
                let _ = p.transition_cr(&cr, *CrState::ALL.choose(rng).unwrap());
            }
        }
        88..=95 => {
            let target = p.state().crs.iter().choose(rng).and_then(|c| {
                let node = c.impact.as_ref()?.items.choose(rng)?.node.clone();
                Some((c.cr_id.clone(), node))
            });
            if let Some((cr, node)) = target {
                let res = if rng.gen_bool(0.7) { Resolution::Resolved } else { Resolution::Waived };
                let _ = p.resolve_item(&cr, &node, res, "ok");
            }
        }
        96..=97 => {
            let name = format!("b{}", rng.gen_range(0..4));
            let _ = p.create_baseline(&name);
        }
        _ => {
            let _ = p.ingest(IngestFormat::Csv, fixtures::REQUIREMENTS_CSV.as_bytes());
        }
    }
}

pub fn node_pool(rng: &mut StdRng) -> Vec<NodeInput> {
    (0..12).map(|i| random_node(rng, i)).collect()
}
