//! Graphviz rendering of the trace graph.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::graph::TraceGraph;
use crate::model::{ArtifactKind, LinkType};

fn shape(kind: ArtifactKind) -> &'static str {
    match kind {
        ArtifactKind::SystemRequirement
        | ArtifactKind::HighLevelRequirement
        | ArtifactKind::LowLevelRequirement
        | ArtifactKind::DesignElement => "box",
        ArtifactKind::TestCase | ArtifactKind::TestResult => "ellipse",
        ArtifactKind::Issue => "note",
        ArtifactKind::SourceUnit => "component",
        ArtifactKind::Commit => "diamond",
        ArtifactKind::Document => "folder",
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// DOT digraph of the active nodes passing `kinds` and the links passing
/// `types` whose endpoints are both shown. Suspect links are dashed.
pub fn export_graph_dot(
    graph: &TraceGraph,
    kinds: Option<&BTreeSet<ArtifactKind>>,
    types: Option<&BTreeSet<LinkType>>,
) -> String {
    let shown: BTreeSet<_> = graph
        .active_nodes()
        .filter(|n| kinds.is_none_or(|k| k.contains(&n.kind)))
        .map(|n| &n.id)
        .collect();
    let mut out = String::from("digraph trace {\n");
    for node in graph.active_nodes().filter(|n| shown.contains(&n.id)) {
        writeln!(
            out,
            "  {} [shape={}, label={}];",
            quote(node.id.as_str()),
            shape(node.kind),
            quote(node.id.as_str())
        )
        .unwrap();
    }
    for link in graph.links() {
        if !types.is_none_or(|t| t.contains(&link.link_type))
            || !shown.contains(&link.from)
            || !shown.contains(&link.to)
        {
            continue;
        }
        let style = if link.suspect { ", style=dashed" } else { "" };
        writeln!(
            out,
            "  {} -> {} [label={}{}];",
            quote(link.from.as_str()),
            quote(link.to.as_str()),
            quote(link.link_type.name()),
            style
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
