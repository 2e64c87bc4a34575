//! Walk a change request from Draft to Closed.

use std::collections::BTreeSet;

use traceforge::change::{compute_impact, resolve_item, ChangeRequest, CrState, ImpactConfig, Resolution};
use traceforge::fixtures::{g1_graph, id};
use traceforge::graph::NodeInput;
use traceforge::model::{ArtifactKind, LinkType, Source};
use traceforge::time::Timestamp;

fn main() {
    let mut g = g1_graph();
    let config = ImpactConfig::with_types([LinkType::Satisfies, LinkType::Refines, LinkType::Implements, LinkType::Verifies]);
    let impact = compute_impact(&g, &BTreeSet::from([id("HLR-1")]), &config).unwrap();
    for item in &impact.items {
        println!("{} d={}", item.node, item.distance);
    }
    let now = Timestamp::from_unix(1_704_067_200);
    let mut cr = ChangeRequest::new("CR-1".into(), "faster boot".into(), String::new(), impact, now);

    g.upsert_node(
        NodeInput::new(id("HLR-1"), ArtifactKind::HighLevelRequirement, Source::ReqStore)
            .title("Boot")
            .body("Starts in 1s"),
    )
    .unwrap();

    for target in [CrState::Analyzed, CrState::Approved, CrState::Implementing] {
        cr.transition(target, &g, now).unwrap();
        println!("-> {}", cr.state);
    }
    if let Err(e) = cr.transition(CrState::Verified, &g, now) {
        println!("blocked: {e}");
    }
    let nodes: Vec<_> = cr.impact.as_ref().unwrap().items.iter().map(|i| i.node.clone()).collect();
    for n in nodes {
        let cleared = resolve_item(&mut cr, &mut g, &n, Resolution::Resolved, "reviewed", now).unwrap();
        println!("resolved {n}, cleared {} suspect link(s)", cleared.len());
    }
    for target in [CrState::Verified, CrState::Closed] {
        cr.transition(target, &g, now).unwrap();
        println!("-> {}", cr.state);
    }
}
