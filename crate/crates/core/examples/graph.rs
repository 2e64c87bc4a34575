//! Build a small trace graph, edit a node and watch links turn suspect.

use std::collections::BTreeSet;

use traceforge::fixtures::{g1_graph, id};
use traceforge::graph::{Direction, NodeInput};
use traceforge::model::{ArtifactKind, LinkType, Source};

fn main() {
    let mut g = g1_graph();
    println!("{} nodes, {} links", g.node_count(), g.link_count());

    for (link, other) in g.neighbors(&id("HLR-1"), Direction::Both, None).unwrap() {
        println!("  {} ({})", other, link.link_type);
    }

    // upward trace from a source file
    let up = BTreeSet::from([LinkType::Implements, LinkType::Refines, LinkType::Satisfies]);
    for r in g.trace_closure(&id("SRC:src/a.c"), Direction::Outgoing, None, Some(&up)).unwrap() {
        println!("  reach {} at {}", r.id, r.distance);
    }

    let edit = NodeInput::new(id("HLR-1"), ArtifactKind::HighLevelRequirement, Source::ReqStore)
        .title("Boot")
        .body("Starts in 1s");
    println!("{:?}", g.upsert_node(edit).unwrap());
    for l in g.links().filter(|l| l.suspect) {
        println!("  suspect {}", l.key());
    }

    if let Err(e) = g.add_link(&id("TC-1"), &id("SYS-1"), LinkType::Verifies) {
        println!("refused: {e}");
    }
}
