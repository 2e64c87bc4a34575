//! The typed bidirectional trace graph.
//!
//! Nodes are keyed by [`ArtifactId`]; links are unique on `(from, type, to)`
//! and indexed both forward (by source) and backward (by target). Every
//! mutation bumps `graph_revision`. When a journal is enabled, each mutation
//! is also recorded as a [`GraphMutation`] so callers can persist it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ArtifactId, ArtifactKind, LinkType, Source, Status};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactNode {
    pub id: ArtifactId,
    pub kind: ArtifactKind,
    pub title: String,
    pub body: String,
    pub attributes: BTreeMap<String, String>,
    pub source: Source,
    pub revision: u64,
    pub status: Status,
    pub content_hash: String,
}

impl ArtifactNode {
    pub fn is_active(&self) -> bool {
        self.status == Status::Active
    }

    pub fn is_derived(&self) -> bool {
        self.attributes.get("derived").map(String::as_str) == Some("true")
    }
}

/// A node as supplied by a caller: everything but the bookkeeping fields.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeInput {
    pub id: ArtifactId,
    pub kind: ArtifactKind,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    pub source: Source,
}

impl NodeInput {
    pub fn new(id: ArtifactId, kind: ArtifactKind, source: Source) -> Self {
        Self {
            id,
            kind,
            title: String::new(),
            body: String::new(),
            attributes: BTreeMap::new(),
            source,
        }
    }

    pub fn title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn body(mut self, body: impl Into<String>) -> Self {
        self.body = body.into();
        self
    }

    pub fn attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    pub fn content_hash(&self) -> String {
        content_hash(self.kind, &self.id, &self.title, &self.body, &self.attributes)
    }
}

/// SHA-256 over kind, id, title, body and the attributes in key order.
/// Revision, source and status do not participate.
pub fn canonical_hash(node: &ArtifactNode) -> String {
    content_hash(node.kind, &node.id, &node.title, &node.body, &node.attributes)
}

fn content_hash(
    kind: ArtifactKind,
    id: &ArtifactId,
    title: &str,
    body: &str,
    attributes: &BTreeMap<String, String>,
) -> String {
    let mut h = Sha256::new();
    for part in [kind.name(), id.as_str(), title, body] {
        h.update(part.as_bytes());
        h.update(b"\n");
    }
    for (k, v) in attributes {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Identity of a link. Orders as the `(from, type, to)` tuple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkKey {
    pub from: ArtifactId,
    #[serde(rename = "type")]
    pub link_type: LinkType,
    pub to: ArtifactId,
}

impl LinkKey {
    pub fn new(from: ArtifactId, link_type: LinkType, to: ArtifactId) -> Self {
        Self { from, link_type, to }
    }

    pub fn touches(&self, id: &ArtifactId) -> bool {
        &self.from == id || &self.to == id
    }
}

impl std::fmt::Display for LinkKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -{}-> {}", self.from, self.link_type, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLink {
    pub from: ArtifactId,
    pub to: ArtifactId,
    #[serde(rename = "type")]
    pub link_type: LinkType,
    pub suspect: bool,
    pub created_rev: u64,
}

impl TraceLink {
    pub fn key(&self) -> LinkKey {
        LinkKey::new(self.from.clone(), self.link_type, self.to.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum UpsertOutcome {
    Created,
    Updated { marked_suspect: usize },
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Outgoing,
    Incoming,
    Both,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "outgoing" | "out" => Some(Direction::Outgoing),
            "incoming" | "in" => Some(Direction::Incoming),
            "both" => Some(Direction::Both),
            _ => None,
        }
    }
}

/// One hop on a traversal path: the link type crossed and the node reached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    #[serde(rename = "type")]
    pub link_type: LinkType,
    pub node: ArtifactId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reached {
    pub id: ArtifactId,
    pub distance: u32,
    pub path: Vec<PathStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("{id} exists as {existing}; kinds are immutable (got {incoming})")]
    KindChanged {
        id: ArtifactId,
        existing: ArtifactKind,
        incoming: ArtifactKind,
    },
    #[error("link endpoint {0} is missing or deleted")]
    DanglingEndpoint(ArtifactId),
    #[error("{link_type} does not permit {from} -> {to}")]
    TypeMatrixViolation {
        from: ArtifactKind,
        link_type: LinkType,
        to: ArtifactKind,
    },
    #[error("link {0} already exists")]
    Duplicate(LinkKey),
    #[error("self link on {0}")]
    SelfLink(ArtifactId),
    #[error("no artifact {0}")]
    NotFound(ArtifactId),
    #[error("artifact {0} is already deleted")]
    AlreadyDeleted(ArtifactId),
    #[error("no link {0}")]
    LinkNotFound(LinkKey),
}

/// A recorded graph mutation. One entry per `graph_revision` increment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mutation")]
pub enum GraphMutation {
    NodeUpserted {
        node: NodeInput,
        #[serde(flatten)]
        outcome: UpsertOutcome,
        revision: u64,
        content_hash: String,
        marked: Vec<LinkKey>,
    },
    NodeRemoved {
        id: ArtifactId,
        removed: Vec<LinkKey>,
    },
    LinkAdded {
        link: LinkKey,
    },
    LinkRemoved {
        link: LinkKey,
    },
    SuspectCleared {
        links: Vec<LinkKey>,
    },
}

#[derive(Debug, Clone, Default)]
pub struct TraceGraph {
    nodes: BTreeMap<ArtifactId, ArtifactNode>,
    links: BTreeMap<LinkKey, TraceLink>,
    forward: BTreeMap<ArtifactId, BTreeSet<LinkKey>>,
    backward: BTreeMap<ArtifactId, BTreeSet<LinkKey>>,
    graph_revision: u64,
    journal: Option<Vec<GraphMutation>>,
}

impl PartialEq for TraceGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.links == other.links
            && self.graph_revision == other.graph_revision
    }
}

impl Eq for TraceGraph {}

impl TraceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Start recording mutations; see [`TraceGraph::take_journal`].
    pub fn enable_journal(&mut self) {
        self.journal.get_or_insert_with(Vec::new);
    }

    pub fn take_journal(&mut self) -> Vec<GraphMutation> {
        self.journal.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// A copy without the journal, for read-only snapshots.
    pub fn snapshot(&self) -> TraceGraph {
        TraceGraph {
            journal: None,
            ..self.clone()
        }
    }

    pub fn graph_revision(&self) -> u64 {
        self.graph_revision
    }

    pub fn node(&self, id: &ArtifactId) -> Option<&ArtifactNode> {
        self.nodes.get(id)
    }

    pub fn contains_active(&self, id: &ArtifactId) -> bool {
        self.nodes.get(id).is_some_and(ArtifactNode::is_active)
    }

    /// All nodes, Deleted included, in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &ArtifactNode> {
        self.nodes.values()
    }

    pub fn active_nodes(&self) -> impl Iterator<Item = &ArtifactNode> {
        self.nodes.values().filter(|n| n.is_active())
    }

    /// All links in `(from, type, to)` order.
    pub fn links(&self) -> impl Iterator<Item = &TraceLink> {
        self.links.values()
    }

    pub fn link(&self, key: &LinkKey) -> Option<&TraceLink> {
        self.links.get(key)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn outgoing_keys(&self, id: &ArtifactId) -> impl Iterator<Item = &LinkKey> {
        self.forward.get(id).into_iter().flatten()
    }

    pub fn incoming_keys(&self, id: &ArtifactId) -> impl Iterator<Item = &LinkKey> {
        self.backward.get(id).into_iter().flatten()
    }

    /// Keys of every link with `id` as either endpoint, sorted.
    pub fn incident_keys(&self, id: &ArtifactId) -> BTreeSet<LinkKey> {
        self.outgoing_keys(id)
            .chain(self.incoming_keys(id))
            .cloned()
            .collect()
    }

    fn record(&mut self, m: GraphMutation) {
        if let Some(j) = self.journal.as_mut() {
            j.push(m);
        }
    }

    pub fn upsert_node(&mut self, incoming: NodeInput) -> Result<UpsertOutcome, GraphError> {
        let hash = incoming.content_hash();
        let (outcome, revision, marked) = match self.nodes.get_mut(&incoming.id) {
            None => {
                self.nodes.insert(
                    incoming.id.clone(),
                    ArtifactNode {
                        id: incoming.id.clone(),
                        kind: incoming.kind,
                        title: incoming.title.clone(),
                        body: incoming.body.clone(),
                        attributes: incoming.attributes.clone(),
                        source: incoming.source,
                        revision: 1,
                        status: Status::Active,
                        content_hash: hash.clone(),
                    },
                );
                (UpsertOutcome::Created, 1, Vec::new())
            }
            Some(existing) => {
                if existing.kind != incoming.kind {
                    return Err(GraphError::KindChanged {
                        id: incoming.id.clone(),
                        existing: existing.kind,
                        incoming: incoming.kind,
                    });
                }
                if existing.content_hash == hash && existing.is_active() {
                    return Ok(UpsertOutcome::Unchanged);
                }
                existing.title = incoming.title.clone();
                existing.body = incoming.body.clone();
                existing.attributes = incoming.attributes.clone();
                existing.source = incoming.source;
                existing.revision += 1;
                existing.status = Status::Active;
                existing.content_hash = hash.clone();
                let revision = existing.revision;
                let marked: Vec<LinkKey> = self.incident_keys(&incoming.id).into_iter().collect();
                for key in &marked {
                    if let Some(l) = self.links.get_mut(key) {
                        l.suspect = true;
                    }
                }
                (
                    UpsertOutcome::Updated {
                        marked_suspect: marked.len(),
                    },
                    revision,
                    marked,
                )
            }
        };
        self.graph_revision += 1;
        self.record(GraphMutation::NodeUpserted {
            node: incoming,
            outcome,
            revision,
            content_hash: hash,
            marked,
        });
        Ok(outcome)
    }

    pub fn add_link(
        &mut self,
        from: &ArtifactId,
        to: &ArtifactId,
        link_type: LinkType,
    ) -> Result<TraceLink, GraphError> {
        if from == to {
            return Err(GraphError::SelfLink(from.clone()));
        }
        let from_kind = self.active_kind(from)?;
        let to_kind = self.active_kind(to)?;
        if !link_type.permits(from_kind, to_kind) {
            return Err(GraphError::TypeMatrixViolation {
                from: from_kind,
                link_type,
                to: to_kind,
            });
        }
        let key = LinkKey::new(from.clone(), link_type, to.clone());
        if self.links.contains_key(&key) {
            return Err(GraphError::Duplicate(key));
        }
        self.graph_revision += 1;
        let link = TraceLink {
            from: from.clone(),
            to: to.clone(),
            link_type,
            suspect: false,
            created_rev: self.graph_revision,
        };
        self.index_link(link.clone());
        self.record(GraphMutation::LinkAdded { link: key });
        Ok(link)
    }

    fn active_kind(&self, id: &ArtifactId) -> Result<ArtifactKind, GraphError> {
        match self.nodes.get(id) {
            Some(n) if n.is_active() => Ok(n.kind),
            _ => Err(GraphError::DanglingEndpoint(id.clone())),
        }
    }

    fn index_link(&mut self, link: TraceLink) {
        let key = link.key();
        self.forward
            .entry(key.from.clone())
            .or_default()
            .insert(key.clone());
        self.backward
            .entry(key.to.clone())
            .or_default()
            .insert(key.clone());
        self.links.insert(key, link);
    }

    fn unindex_link(&mut self, key: &LinkKey) -> Option<TraceLink> {
        let link = self.links.remove(key)?;
        for (index, id) in [(&mut self.forward, &key.from), (&mut self.backward, &key.to)] {
            if let Some(set) = index.get_mut(id) {
                set.remove(key);
                if set.is_empty() {
                    index.remove(id);
                }
            }
        }
        Some(link)
    }

    pub fn remove_link(&mut self, key: &LinkKey) -> Result<TraceLink, GraphError> {
        let link = self
            .unindex_link(key)
            .ok_or_else(|| GraphError::LinkNotFound(key.clone()))?;
        self.graph_revision += 1;
        self.record(GraphMutation::LinkRemoved { link: key.clone() });
        Ok(link)
    }

    /// Tombstones a node and drops its incident links. Returns the removed
    /// link keys.
    pub fn remove_node(&mut self, id: &ArtifactId) -> Result<Vec<LinkKey>, GraphError> {
        match self.nodes.get(id) {
            None => return Err(GraphError::NotFound(id.clone())),
            Some(n) if !n.is_active() => return Err(GraphError::AlreadyDeleted(id.clone())),
            Some(_) => {}
        }
        let removed: Vec<LinkKey> = self.incident_keys(id).into_iter().collect();
        for key in &removed {
            self.unindex_link(key);
        }
        if let Some(n) = self.nodes.get_mut(id) {
            n.status = Status::Deleted;
        }
        self.graph_revision += 1;
        self.record(GraphMutation::NodeRemoved {
            id: id.clone(),
            removed: removed.clone(),
        });
        Ok(removed)
    }

    /// Clears the suspect flag on the given links. Links that are absent or
    /// already clear are skipped; the cleared keys are returned. Counts as a
    /// mutation only when something was cleared.
    pub fn clear_suspects<'a>(
        &mut self,
        keys: impl IntoIterator<Item = &'a LinkKey>,
    ) -> Vec<LinkKey> {
        let mut cleared = Vec::new();
        for key in keys {
            if let Some(l) = self.links.get_mut(key) {
                if l.suspect {
                    l.suspect = false;
                    cleared.push(key.clone());
                }
            }
        }
        cleared.sort();
        if !cleared.is_empty() {
            self.graph_revision += 1;
            self.record(GraphMutation::SuspectCleared {
                links: cleared.clone(),
            });
        }
        cleared
    }

    pub fn suspect_keys_incident(&self, id: &ArtifactId) -> Vec<LinkKey> {
        self.incident_keys(id)
            .into_iter()
            .filter(|k| self.links[k].suspect)
            .collect()
    }

    /// Incident links passing the direction and type filters, as
    /// `(link, neighbor)` sorted by neighbor id, then type, outgoing first.
    pub fn neighbors(
        &self,
        id: &ArtifactId,
        direction: Direction,
        types: Option<&BTreeSet<LinkType>>,
    ) -> Result<Vec<(&TraceLink, &ArtifactId)>, GraphError> {
        if !self.nodes.contains_key(id) {
            return Err(GraphError::NotFound(id.clone()));
        }
        let passes = |k: &LinkKey| types.is_none_or(|t| t.contains(&k.link_type));
        let mut out: Vec<(&TraceLink, &ArtifactId, u8)> = Vec::new();
        if matches!(direction, Direction::Outgoing | Direction::Both) {
            for k in self.outgoing_keys(id).filter(|k| passes(k)) {
                out.push((&self.links[k], &k.to, 0));
            }
        }
        if matches!(direction, Direction::Incoming | Direction::Both) {
            for k in self.incoming_keys(id).filter(|k| passes(k)) {
                out.push((&self.links[k], &k.from, 1));
            }
        }
        out.sort_by(|a, b| {
            (a.1, a.0.link_type, a.2).cmp(&(b.1, b.0.link_type, b.2))
        });
        Ok(out.into_iter().map(|(l, n, _)| (l, n)).collect())
    }

    /// Multi-source breadth-first search. Seeds are at distance 0 with an
    /// empty path; each other reached node keeps the first shortest path
    /// found when expanding seeds in id order and neighbors in
    /// [`TraceGraph::neighbors`] order. Returned sorted by (distance, id).
    pub fn reach(
        &self,
        seeds: &BTreeSet<ArtifactId>,
        direction: Direction,
        max_depth: Option<u32>,
        types: Option<&BTreeSet<LinkType>>,
    ) -> Result<Vec<Reached>, GraphError> {
        let mut seen: BTreeMap<ArtifactId, Reached> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for s in seeds {
            if !self.nodes.contains_key(s) {
                return Err(GraphError::NotFound(s.clone()));
            }
            seen.insert(
                s.clone(),
                Reached {
                    id: s.clone(),
                    distance: 0,
                    path: Vec::new(),
                },
            );
            queue.push_back(s.clone());
        }
        while let Some(current) = queue.pop_front() {
            let (distance, path) = {
                let r = &seen[&current];
                (r.distance, r.path.clone())
            };
            if max_depth.is_some_and(|d| distance >= d) {
                continue;
            }
            for (link, next) in self.neighbors(&current, direction, types)? {
                if seen.contains_key(next) {
                    continue;
                }
                let mut p = path.clone();
                p.push(PathStep {
                    link_type: link.link_type,
                    node: next.clone(),
                });
                seen.insert(
                    next.clone(),
                    Reached {
                        id: next.clone(),
                        distance: distance + 1,
                        path: p,
                    },
                );
                queue.push_back(next.clone());
            }
        }
        let mut out: Vec<Reached> = seen.into_values().collect();
        out.sort_by(|a, b| (a.distance, &a.id).cmp(&(b.distance, &b.id)));
        Ok(out)
    }

    /// Nodes reachable from `id` (excluding `id` itself) with BFS distance
    /// and one shortest path each.
    pub fn trace_closure(
        &self,
        id: &ArtifactId,
        direction: Direction,
        max_depth: Option<u32>,
        types: Option<&BTreeSet<LinkType>>,
    ) -> Result<Vec<Reached>, GraphError> {
        let seeds = BTreeSet::from([id.clone()]);
        let mut r = self.reach(&seeds, direction, max_depth, types)?;
        r.retain(|x| &x.id != id);
        Ok(r)
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            graph_revision: self.graph_revision,
            nodes: self.nodes.values().cloned().collect(),
            links: self.links.values().cloned().collect(),
        }
    }

    /// Canonical JSON export: nodes by id, links by `(from, type, to)`.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.export()).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<TraceGraph, ImportError> {
        let export: GraphExport =
            serde_json::from_str(text).map_err(|e| ImportError::Json(e.to_string()))?;
        TraceGraph::import(export)
    }

    pub fn import(export: GraphExport) -> Result<TraceGraph, ImportError> {
        let mut g = TraceGraph::new();
        for n in export.nodes {
            if n.revision == 0 {
                return Err(ImportError::Invalid(format!("{}: revision 0", n.id)));
            }
            if canonical_hash(&n) != n.content_hash {
                return Err(ImportError::Invalid(format!("{}: content_hash mismatch", n.id)));
            }
            if g.nodes.insert(n.id.clone(), n.clone()).is_some() {
                return Err(ImportError::Invalid(format!("{}: duplicate node", n.id)));
            }
        }
        for l in export.links {
            let key = l.key();
            if l.from == l.to {
                return Err(ImportError::Invalid(format!("{key}: self link")));
            }
            let from_kind = g.active_kind(&l.from).map_err(|e| ImportError::Invalid(e.to_string()))?;
            let to_kind = g.active_kind(&l.to).map_err(|e| ImportError::Invalid(e.to_string()))?;
            if !l.link_type.permits(from_kind, to_kind) {
                return Err(ImportError::Invalid(format!("{key}: violates endpoint matrix")));
            }
            if g.links.contains_key(&key) {
                return Err(ImportError::Invalid(format!("{key}: duplicate link")));
            }
            g.index_link(l);
        }
        g.graph_revision = export.graph_revision;
        Ok(g)
    }

    /// Checks index consistency, endpoint liveness and the link matrix.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut from_index = 0usize;
        for (id, set) in &self.forward {
            for k in set {
                if &k.from != id || !self.links.contains_key(k) {
                    return Err(format!("forward index entry {k} under {id} is stale"));
                }
                from_index += 1;
            }
        }
        let mut from_back = 0usize;
        for (id, set) in &self.backward {
            for k in set {
                if &k.to != id || !self.links.contains_key(k) {
                    return Err(format!("backward index entry {k} under {id} is stale"));
                }
                from_back += 1;
            }
        }
        if from_index != self.links.len() || from_back != self.links.len() {
            return Err("index sizes differ from link count".into());
        }
        for (k, l) in &self.links {
            if &l.key() != k {
                return Err(format!("link stored under wrong key {k}"));
            }
            let f = self.nodes.get(&k.from).ok_or(format!("{k}: missing source"))?;
            let t = self.nodes.get(&k.to).ok_or(format!("{k}: missing target"))?;
            if !f.is_active() || !t.is_active() {
                return Err(format!("{k}: endpoint deleted"));
            }
            if !k.link_type.permits(f.kind, t.kind) {
                return Err(format!("{k}: violates endpoint matrix"));
            }
        }
        for n in self.nodes.values() {
            if canonical_hash(n) != n.content_hash {
                return Err(format!("{}: stale content hash", n.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphExport {
    pub graph_revision: u64,
    pub nodes: Vec<ArtifactNode>,
    pub links: Vec<TraceLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImportError {
    #[error("graph JSON: {0}")]
    Json(String),
    #[error("graph JSON content: {0}")]
    Invalid(String),
}
