use std::collections::{BTreeMap, BTreeSet};

use chrono::SecondsFormat;

use super::{
    parse_trailers, CommitRecord, Diagnostic, IngestBatch, IngestReport, IssueRecord, Location,
    RequirementRecord, TrailerKey,
};
use crate::graph::{GraphError, NodeInput, TraceGraph, UpsertOutcome};
use crate::model::{ArtifactId, ArtifactKind, LinkType, Source};

/// Applies a batch of parsed records to `graph`.
///
/// Records are applied requirements first (by id), then issues (by key),
/// then commits (by date, then hash). All nodes are upserted before any link
/// is attempted, so a parent that sorts after its child still links. Link
/// failures are reported and counted as skipped; nothing aborts the merge.
pub fn merge_into_graph(graph: &mut TraceGraph, batch: &IngestBatch) -> IngestReport {
    let mut report = IngestReport::default();

    let mut requirements: Vec<&RequirementRecord> = batch.requirements.iter().collect();
    requirements.sort_by(|a, b| (&a.id, *a).cmp(&(&b.id, *b)));
    let mut issues: Vec<&IssueRecord> = batch.issues.iter().collect();
    issues.sort_by(|a, b| (&a.key, *a).cmp(&(&b.key, *b)));
    let mut commits: Vec<&CommitRecord> = batch.commits.iter().collect();
    commits.sort_by(|a, b| (a.date, &a.hash, *a).cmp(&(b.date, &b.hash, *b)));

    // Ids whose node upsert failed; their links are not attempted.
    let mut failed: BTreeSet<ArtifactId> = BTreeSet::new();
    let mut pending_links: Vec<(ArtifactId, LinkType, ArtifactId)> = Vec::new();

    for r in &requirements {
        let mut attributes = r.attributes.clone();
        if r.derived {
            attributes.insert("derived".into(), "true".into());
        }
        let node = NodeInput {
            id: r.id.clone(),
            kind: r.kind,
            title: r.title.clone(),
            body: r.body.clone(),
            attributes,
            source: Source::ReqStore,
        };
        if !upsert(graph, node, &mut report) {
            failed.insert(r.id.clone());
        }
    }

    for i in &issues {
        let node = NodeInput::new(i.key.clone(), ArtifactKind::Issue, Source::IssueTracker)
            .title(i.summary.clone())
            .attr("type", i.issue_type.name())
            .attr("status", i.status.clone());
        if !upsert(graph, node, &mut report) {
            failed.insert(i.key.clone());
        }
    }

    let mut commit_links = Vec::new();
    // each unit is written once, by the last commit touching it, so a
    // re-ingest finds it unchanged
    let mut units: BTreeMap<ArtifactId, (&String, &String)> = BTreeMap::new();
    for c in &commits {
        let cid = match c.node_id() {
            Ok(id) => id,
            Err(e) => {
                report.diagnostics.push(Diagnostic::error(
                    Location::Record(c.hash.clone()),
                    "BadCommitId",
                    e.to_string(),
                ));
                continue;
            }
        };
        let trailers = parse_trailers(&c.message);
        let refs: Vec<String> = trailers
            .iter()
            .filter(|(k, _)| *k == TrailerKey::Refs)
            .flat_map(|(_, ids)| ids.iter().map(ToString::to_string))
            .collect();
        let mut node = NodeInput::new(cid.clone(), ArtifactKind::Commit, Source::Vcs)
            .title(c.message.lines().next().unwrap_or_default())
            .body(c.message.clone())
            .attr("author", c.author.clone())
            .attr("date", c.date.to_rfc3339_opts(SecondsFormat::Secs, true));
        if !refs.is_empty() {
            node = node.attr("refs", refs.join(","));
        }
        if !upsert(graph, node, &mut report) {
            failed.insert(cid);
            continue;
        }

        let mut touched = BTreeMap::new();
        for path in &c.files {
            match ArtifactId::namespaced("SRC", path) {
                Ok(sid) => {
                    touched.insert(sid, path);
                }
                Err(e) => report.diagnostics.push(Diagnostic::warning(
                    Location::Record(cid.to_string()),
                    "BadPath",
                    e.to_string(),
                )),
            }
        }
        for (sid, path) in touched {
            commit_links.push((cid.clone(), LinkType::Modifies, sid.clone()));
            units.insert(sid, (path, &c.hash));
        }
        for (key, targets) in trailers {
            let link_type = match key {
                TrailerKey::Resolves => LinkType::Resolves,
                TrailerKey::Implements | TrailerKey::Verifies => LinkType::Contributes,
                TrailerKey::Refs => continue,
            };
            for t in targets {
                commit_links.push((cid.clone(), link_type, t));
            }
        }
    }

    for (sid, (path, hash)) in units {
        let unit = NodeInput::new(sid.clone(), ArtifactKind::SourceUnit, Source::Vcs)
            .title(path.clone())
            .body(hash.clone());
        if !upsert(graph, unit, &mut report) {
            failed.insert(sid);
        }
    }
    commit_links.retain(|(_, t, to)| *t != LinkType::Modifies || !failed.contains(to));

    for r in &requirements {
        if failed.contains(&r.id) {
            continue;
        }
        let Some(parent) = &r.parent_id else { continue };
        let parent_kind = match graph.node(parent) {
            Some(n) if n.is_active() => n.kind,
            _ => {
                report.counts.links_skipped += 1;
                report.diagnostics.push(Diagnostic::warning(
                    Location::Record(r.id.to_string()),
                    "DanglingParent",
                    format!("parent {parent} is missing or deleted"),
                ));
                continue;
            }
        };
        match LinkType::between(r.kind, parent_kind) {
            Some(t) => pending_links.push((r.id.clone(), t, parent.clone())),
            None => {
                report.counts.links_skipped += 1;
                report.diagnostics.push(Diagnostic::warning(
                    Location::Record(r.id.to_string()),
                    "IllegalParent",
                    format!("no trace relation from {} to {}", r.kind, parent_kind),
                ));
            }
        }
    }
    for i in &issues {
        if failed.contains(&i.key) {
            continue;
        }
        for (t, target) in &i.links {
            pending_links.push((i.key.clone(), *t, target.clone()));
        }
    }
    pending_links.extend(commit_links);

    for (from, t, to) in pending_links {
        match graph.add_link(&from, &to, t) {
            Ok(_) => report.counts.links_created += 1,
            Err(GraphError::Duplicate(_)) => {}
            Err(e) => {
                report.counts.links_skipped += 1;
                report.diagnostics.push(Diagnostic::warning(
                    Location::Record(from.to_string()),
                    "LinkRejected",
                    e.to_string(),
                ));
            }
        }
    }
    report
}

fn upsert(graph: &mut TraceGraph, node: NodeInput, report: &mut IngestReport) -> bool {
    let id = node.id.clone();
    match graph.upsert_node(node) {
        Ok(UpsertOutcome::Created) => report.counts.created += 1,
        Ok(UpsertOutcome::Updated { .. }) => report.counts.updated += 1,
        Ok(UpsertOutcome::Unchanged) => report.counts.unchanged += 1,
        Err(e) => {
            report.diagnostics.push(Diagnostic::error(
                Location::Record(id.to_string()),
                "KindConflict",
                e.to_string(),
            ));
            return false;
        }
    }
    true
}
