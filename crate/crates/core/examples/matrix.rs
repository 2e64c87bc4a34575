//! Build a traceability matrix and print it as CSV.

use std::collections::BTreeSet;

use traceforge::compliance::{build_trace_matrix, export_matrix_csv};
use traceforge::fixtures::g1_graph;
use traceforge::model::{ArtifactKind, LinkType};

fn main() {
    let g = g1_graph();
    let m = build_trace_matrix(
        &g,
        ArtifactKind::HighLevelRequirement,
        ArtifactKind::SystemRequirement,
        &BTreeSet::from([LinkType::Satisfies]),
    )
    .unwrap();
    print!("{}", export_matrix_csv(&m));

    let m = build_trace_matrix(
        &g,
        ArtifactKind::TestCase,
        ArtifactKind::HighLevelRequirement,
        &BTreeSet::from([LinkType::Verifies]),
    )
    .unwrap();
    print!("{}", export_matrix_csv(&m));

    let bad = build_trace_matrix(
        &g,
        ArtifactKind::HighLevelRequirement,
        ArtifactKind::SystemRequirement,
        &BTreeSet::from([LinkType::Records]),
    );
    println!("{:?}", bad.err());
}
