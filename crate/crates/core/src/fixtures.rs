//! The small reference project used throughout the docs, examples and tests.
//!
//! It contains one artifact of each traced kind:
//!
//! ```text
//! HLR-1 -SATISFIES-> SYS-1          LLR-1 -REFINES-> HLR-1
//! SRC:src/a.c -IMPLEMENTS-> LLR-1   TC-1 -VERIFIES-> HLR-1
//! TR-1 -RECORDS-> TC-1              ISS-1 -TRACKS-> HLR-1
//! CMT-0aaa -MODIFIES-> SRC:src/a.c  CMT-0aaa -RESOLVES-> ISS-1
//! ```
//!
//! plus the derived requirement HLR-2, which has no parent and no test.

use crate::graph::{NodeInput, TraceGraph};
use crate::model::{ArtifactId, ArtifactKind, LinkType, Source};

pub const REQUIREMENTS_CSV: &str = include_str!("../fixtures/g1/requirements.csv");
pub const REQUIREMENTS_REQIF: &str = include_str!("../fixtures/g1/requirements.reqif");
pub const ISSUES_JSON: &str = include_str!("../fixtures/g1/issues.json");
pub const VCS_JSONL: &str = include_str!("../fixtures/g1/vcs.jsonl");

/// Shorthand for a known-good id literal. Panics on invalid input.
pub fn id(s: &str) -> ArtifactId {
    ArtifactId::new(s).unwrap_or_else(|e| panic!("{e}"))
}

pub fn g1_nodes() -> Vec<NodeInput> {
    use ArtifactKind::*;
    vec![
        NodeInput::new(id("SYS-1"), SystemRequirement, Source::ReqStore)
            .title("Power-on self test")
            .body("The unit shall complete a self test after power-on"),
        NodeInput::new(id("HLR-1"), HighLevelRequirement, Source::ReqStore)
            .title("Boot")
            .body("Starts in 2s")
            .attr("phase", "1"),
        NodeInput::new(id("HLR-2"), HighLevelRequirement, Source::ReqStore)
            .title("Watchdog")
            .body("Kick the watchdog every 100 ms, from timing analysis")
            .attr("derived", "true"),
        NodeInput::new(id("LLR-1"), LowLevelRequirement, Source::ReqStore)
            .title("Parse frame")
            .body("Parse the boot frame header"),
        NodeInput::new(id("SRC:src/a.c"), SourceUnit, Source::Vcs)
            .title("src/a.c")
            .body("0aaa"),
        NodeInput::new(id("TC-1"), TestCase, Source::ReqStore)
            .title("boot test")
            .body("steps")
            .attr("env", "rig"),
        NodeInput::new(id("TR-1"), TestResult, Source::ReqStore)
            .title("boot test run 1")
            .body("pass"),
        NodeInput::new(id("ISS-1"), Issue, Source::IssueTracker)
            .title("crash")
            .attr("status", "open")
            .attr("type", "defect"),
        NodeInput::new(id("CMT-0aaa"), Commit, Source::Vcs)
            .title("fix")
            .body("fix\n\nResolves: ISS-1")
            .attr("author", "jd")
            .attr("date", "2024-01-02T03:04:05Z"),
    ]
}

pub fn g1_links() -> Vec<(ArtifactId, LinkType, ArtifactId)> {
    use LinkType::*;
    [
        ("HLR-1", Satisfies, "SYS-1"),
        ("LLR-1", Refines, "HLR-1"),
        ("SRC:src/a.c", Implements, "LLR-1"),
        ("TC-1", Verifies, "HLR-1"),
        ("TR-1", Records, "TC-1"),
        ("ISS-1", Tracks, "HLR-1"),
        ("CMT-0aaa", Modifies, "SRC:src/a.c"),
        ("CMT-0aaa", Resolves, "ISS-1"),
    ]
    .into_iter()
    .map(|(f, t, to)| (id(f), t, id(to)))
    .collect()
}

/// Builds the reference graph directly, without ingestion.
pub fn g1_graph() -> TraceGraph {
    let mut g = TraceGraph::new();
    populate_g1(&mut g);
    g
}

/// Inserts the reference nodes and links into `g`.
pub fn populate_g1(g: &mut TraceGraph) {
    for n in g1_nodes() {
        g.upsert_node(n).expect("fixture node");
    }
    for (from, t, to) in g1_links() {
        g.add_link(&from, &to, t).expect("fixture link");
    }
}
