//! Parse tool exports and merge them into a graph. Re-ingesting changes nothing.

use traceforge::fixtures;
use traceforge::graph::TraceGraph;
use traceforge::ingest::{merge_into_graph, parse_export, IngestFormat};

fn main() {
    let exports = [
        (IngestFormat::Csv, fixtures::REQUIREMENTS_CSV),
        (IngestFormat::Issues, fixtures::ISSUES_JSON),
        (IngestFormat::Vcslog, fixtures::VCS_JSONL),
    ];
    let mut g = TraceGraph::new();
    for round in 1..=2 {
        for (format, text) in exports {
            let (batch, diags) = parse_export(format, text);
            let r = merge_into_graph(&mut g, &batch);
            println!("round {round} {format:?}: {:?}", r.counts);
            for d in diags.iter().chain(&r.diagnostics) {
                println!("  {d}");
            }
        }
    }

    let broken = "id,kind,title,body,parent_id,derived,attributes\nHLR-9,HLR\nbad id,HLR,x,,,,\nHLR-8,XYZ,t,,,,\n";
    let (_, diags) = parse_export(IngestFormat::Csv, broken);
    for d in diags {
        println!("{d}");
    }
}
