//! Render the graph as Graphviz DOT, whole and filtered.

use std::collections::BTreeSet;

use traceforge::export::export_graph_dot;
use traceforge::fixtures::g1_graph;
use traceforge::model::{ArtifactKind, LinkType};

fn main() {
    let g = g1_graph();
    print!("{}", export_graph_dot(&g, None, None));

    let kinds = BTreeSet::from([ArtifactKind::HighLevelRequirement, ArtifactKind::SystemRequirement]);
    let types = BTreeSet::from([LinkType::Satisfies]);
    print!("{}", export_graph_dot(&g, Some(&kinds), Some(&types)));
}
