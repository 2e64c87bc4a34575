//! Baselines and the configuration index.
//!
//! The index is a line-oriented UTF-8 document:
//!
//! ```text
//! CONFIGURATION-INDEX v1
//! project: <name>
//! baseline: <name>
//! created: <RFC 3339 UTC>
//! [NODES]
//! <id>\t<kind>\t<revision>\t<content_hash>\t<status>     sorted bytewise by id
//! [LINKS]
//! <from>\t<type>\t<to>\t<0|1>                            sorted by (from, type, to)
//! ```
//!
//! The index hash is SHA-256 over the bytes from `[NODES]` to the end, so two
//! baselines of the same content hash equally whatever their header says.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{LinkKey, TraceGraph};
use crate::model::{ArtifactId, ArtifactKind, LinkType, Status};
use crate::time::Timestamp;

pub const INDEX_MAGIC: &str = "CONFIGURATION-INDEX v1";
const NODES_MARKER: &str = "[NODES]\n";
const LINKS_MARKER: &str = "[LINKS]\n";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexNode {
    pub id: ArtifactId,
    pub kind: ArtifactKind,
    pub revision: u64,
    pub content_hash: String,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexLink {
    pub from: ArtifactId,
    #[serde(rename = "type")]
    pub link_type: LinkType,
    pub to: ArtifactId,
    pub suspect: bool,
}

impl IndexLink {
    pub fn key(&self) -> LinkKey {
        LinkKey::new(self.from.clone(), self.link_type, self.to.clone())
    }
}

/// Parsed form of a configuration index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigurationIndex {
    pub project: String,
    pub baseline: String,
    pub created: Timestamp,
    pub nodes: Vec<IndexNode>,
    pub links: Vec<IndexLink>,
}

impl ConfigurationIndex {
    pub fn of_graph(graph: &TraceGraph, project: &str, baseline: &str, created: Timestamp) -> Self {
        Self {
            project: project.to_string(),
            baseline: baseline.to_string(),
            created,
            nodes: graph
                .nodes()
                .map(|n| IndexNode {
                    id: n.id.clone(),
                    kind: n.kind,
                    revision: n.revision,
                    content_hash: n.content_hash.clone(),
                    status: n.status,
                })
                .collect(),
            links: graph
                .links()
                .map(|l| IndexLink {
                    from: l.from.clone(),
                    link_type: l.link_type,
                    to: l.to.clone(),
                    suspect: l.suspect,
                })
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut nodes: Vec<&IndexNode> = self.nodes.iter().collect();
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut links: Vec<&IndexLink> = self.links.iter().collect();
        links.sort_by(|a, b| {
            (&a.from, a.link_type.name(), &a.to).cmp(&(&b.from, b.link_type.name(), &b.to))
        });

        let mut out = String::new();
        writeln!(out, "{INDEX_MAGIC}").unwrap();
        writeln!(out, "project: {}", self.project).unwrap();
        writeln!(out, "baseline: {}", self.baseline).unwrap();
        writeln!(out, "created: {}", self.created).unwrap();
        out.push_str(NODES_MARKER);
        for n in nodes {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:?}",
                n.id,
                n.kind.name(),
                n.revision,
                n.content_hash,
                n.status
            )
            .unwrap();
        }
        out.push_str(LINKS_MARKER);
        for l in links {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                l.from,
                l.link_type.name(),
                l.to,
                u8::from(l.suspect)
            )
            .unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, IndexParseError> {
        let err = |line: usize, msg: &str| IndexParseError {
            line,
            message: msg.to_string(),
        };
        if !text.ends_with('\n') {
            return Err(err(text.lines().count(), "missing trailing newline"));
        }
        let lines: Vec<&str> = text[..text.len() - 1].split('\n').collect();
        let header = |i: usize, prefix: &str| -> Result<&str, IndexParseError> {
            lines
                .get(i)
                .and_then(|l| l.strip_prefix(prefix))
                .ok_or_else(|| err(i + 1, &format!("expected `{prefix}` line")))
        };
        if lines.first() != Some(&INDEX_MAGIC) {
            return Err(err(1, "not a v1 configuration index"));
        }
        let project = header(1, "project: ")?.to_string();
        let baseline = header(2, "baseline: ")?.to_string();
        let created = Timestamp::parse(header(3, "created: ")?)
            .map_err(|e| err(4, &format!("bad timestamp: {e}")))?;
        if lines.get(4) != Some(&"[NODES]") {
            return Err(err(5, "expected [NODES]"));
        }
        let links_at = lines
            .iter()
            .position(|l| *l == "[LINKS]")
            .ok_or_else(|| err(lines.len(), "missing [LINKS]"))?;

        let mut nodes = Vec::new();
        for (i, line) in lines.iter().enumerate().take(links_at).skip(5) {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || err(i + 1, "malformed node line");
            let [id, kind, rev, hash, status] = f[..] else {
                return Err(bad());
            };
            nodes.push(IndexNode {
                id: ArtifactId::new(id).map_err(|_| bad())?,
                kind: ArtifactKind::from_name(kind).ok_or_else(bad)?,
                revision: rev.parse().map_err(|_| bad())?,
                content_hash: hash.to_string(),
                status: match status {
                    "Active" => Status::Active,
                    "Deleted" => Status::Deleted,
                    _ => return Err(bad()),
                },
            });
        }
        let mut links = Vec::new();
        for (i, line) in lines.iter().enumerate().skip(links_at + 1) {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || err(i + 1, "malformed link line");
            let [from, ty, to, suspect] = f[..] else {
                return Err(bad());
            };
            links.push(IndexLink {
                from: ArtifactId::new(from).map_err(|_| bad())?,
                link_type: LinkType::parse(ty).map_err(|_| bad())?,
                to: ArtifactId::new(to).map_err(|_| bad())?,
                suspect: match suspect {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                },
            });
        }
        Ok(Self {
            project,
            baseline,
            created,
            nodes,
            links,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("configuration index line {line}: {message}")]
pub struct IndexParseError {
    pub line: usize,
    pub message: String,
}

/// SHA-256 over the index bytes from the `[NODES]` marker onward. An index
/// without the marker hashes as if it were empty.
pub fn index_hash(index_text: &str) -> String {
    let body = index_text
        .find(NODES_MARKER)
        .map_or("", |at| &index_text[at..]);
    hex::encode(Sha256::digest(body.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub baseline_id: String,
    pub name: String,
    pub created: Timestamp,
    pub graph_revision: u64,
    pub index_hash: String,
    pub parent: Option<String>,
    /// Canonical index bytes, exactly as written to disk.
    #[serde(skip)]
    pub index: String,
}

impl Baseline {
    pub fn parsed_index(&self) -> Result<ConfigurationIndex, IndexParseError> {
        ConfigurationIndex::parse(&self.index)
    }
}

/// Recomputes the hash over the stored index bytes.
pub fn verify_baseline(baseline: &Baseline) -> bool {
    index_hash(&baseline.index) == baseline.index_hash
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDiff {
    pub added: Vec<ArtifactId>,
    pub removed: Vec<ArtifactId>,
    pub modified: Vec<ArtifactId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkDiff {
    pub added: Vec<LinkKey>,
    pub removed: Vec<LinkKey>,
    pub suspect_changed: Vec<LinkKey>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineDiff {
    pub a: String,
    pub b: String,
    pub nodes: NodeDiff,
    pub links: LinkDiff,
}

impl BaselineDiff {
    pub fn is_empty(&self) -> bool {
        self.nodes == NodeDiff::default() && self.links == LinkDiff::default()
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("diff {} -> {}\n", self.a, self.b);
        for (tag, ids) in [
            ("+", &self.nodes.added),
            ("-", &self.nodes.removed),
            ("~", &self.nodes.modified),
        ] {
            for id in ids {
                writeln!(out, "node {tag} {id}").unwrap();
            }
        }
        for (tag, keys) in [
            ("+", &self.links.added),
            ("-", &self.links.removed),
            ("?", &self.links.suspect_changed),
        ] {
            for k in keys {
                writeln!(out, "link {tag} {k}").unwrap();
            }
        }
        out
    }
}

/// Compares two indices. A node counts as modified when its revision,
/// content hash or status differs.
pub fn diff_indices(a: &ConfigurationIndex, b: &ConfigurationIndex) -> (NodeDiff, LinkDiff) {
    let na: BTreeMap<&ArtifactId, &IndexNode> = a.nodes.iter().map(|n| (&n.id, n)).collect();
    let nb: BTreeMap<&ArtifactId, &IndexNode> = b.nodes.iter().map(|n| (&n.id, n)).collect();
    let mut nodes = NodeDiff::default();
    for (id, x) in &na {
        match nb.get(id) {
            None => nodes.removed.push((*id).clone()),
            Some(y) => {
                if (x.revision, &x.content_hash, x.status) != (y.revision, &y.content_hash, y.status) {
                    nodes.modified.push((*id).clone());
                }
            }
        }
    }
    nodes.added = nb.keys().filter(|id| !na.contains_key(*id)).map(|id| (*id).clone()).collect();

    let la: BTreeMap<LinkKey, bool> = a.links.iter().map(|l| (l.key(), l.suspect)).collect();
    let lb: BTreeMap<LinkKey, bool> = b.links.iter().map(|l| (l.key(), l.suspect)).collect();
    let mut links = LinkDiff::default();
    for (k, s) in &la {
        match lb.get(k) {
            None => links.removed.push(k.clone()),
            Some(t) if t != s => links.suspect_changed.push(k.clone()),
            Some(_) => {}
        }
    }
    links.added = lb.keys().filter(|k| !la.contains_key(*k)).cloned().collect();
    (nodes, links)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("a baseline named {0:?} already exists")]
    DuplicateName(String),
    #[error("baseline name must be a non-empty single line")]
    BadName,
    #[error("no baseline {0}")]
    NotFound(String),
    #[error("stored index of {0} is unreadable: {1}")]
    Corrupt(String, IndexParseError),
}

/// The baselines of one project, in creation order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BaselineRegistry {
    baselines: Vec<Baseline>,
}

impl BaselineRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_id(&self) -> String {
        format!("BL-{}", self.baselines.len() + 1)
    }

    /// Renders the index of the current graph without storing anything.
    pub fn prepare(
        &self,
        graph: &TraceGraph,
        project: &str,
        name: &str,
        created: Timestamp,
    ) -> Result<Baseline, BaselineError> {
        if name.trim().is_empty() || name.contains(['\n', '\r']) {
            return Err(BaselineError::BadName);
        }
        if self.baselines.iter().any(|b| b.name == name) {
            return Err(BaselineError::DuplicateName(name.to_string()));
        }
        let index = ConfigurationIndex::of_graph(graph, project, name, created).render();
        Ok(Baseline {
            baseline_id: self.next_id(),
            name: name.to_string(),
            created,
            graph_revision: graph.graph_revision(),
            index_hash: index_hash(&index),
            parent: self.baselines.last().map(|b| b.baseline_id.clone()),
            index,
        })
    }

    pub fn create(
        &mut self,
        graph: &TraceGraph,
        project: &str,
        name: &str,
        created: Timestamp,
    ) -> Result<&Baseline, BaselineError> {
        let b = self.prepare(graph, project, name, created)?;
        self.baselines.push(b);
        Ok(self.baselines.last().expect("just pushed"))
    }

    pub fn insert(&mut self, baseline: Baseline) {
        self.baselines.push(baseline);
    }

    pub fn get(&self, id: &str) -> Result<&Baseline, BaselineError> {
        self.baselines
            .iter()
            .find(|b| b.baseline_id == id)
            .ok_or_else(|| BaselineError::NotFound(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Baseline> {
        self.baselines.iter()
    }

    pub fn len(&self) -> usize {
        self.baselines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.baselines.is_empty()
    }

    pub fn diff(&self, a: &str, b: &str) -> Result<BaselineDiff, BaselineError> {
        let parse = |id: &str| -> Result<ConfigurationIndex, BaselineError> {
            self.get(id)?
                .parsed_index()
                .map_err(|e| BaselineError::Corrupt(id.to_string(), e))
        };
        let (nodes, links) = diff_indices(&parse(a)?, &parse(b)?);
        Ok(BaselineDiff {
            a: a.to_string(),
            b: b.to_string(),
            nodes,
            links,
        })
    }
}

/// Ids appearing in a set of link keys; handy for diff assertions.
pub fn link_endpoints(keys: &[LinkKey]) -> BTreeSet<&ArtifactId> {
    keys.iter().flat_map(|k| [&k.from, &k.to]).collect()
}
