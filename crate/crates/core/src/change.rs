//! Change requests and their impact maps.
//!
//! A change request is seeded with the artifacts a change starts from. Its
//! impact set is everything reachable from the seeds over the allowed link
//! types, in both directions, each with a shortest path back to a seed.
//! Items are worked off (resolved or waived) while the request moves through
//! its lifecycle:
//!
//! ```text
//! Draft -> Analyzed -> Approved -> Implementing -> Verified -> Closed
//!   \________\______________________________________________> Rejected
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Direction, LinkKey, PathStep, TraceGraph};
use crate::model::{ArtifactId, LinkType};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactConfig {
    pub types: BTreeSet<LinkType>,
    pub max_depth: Option<u32>,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        Self {
            types: LinkType::ALL.into_iter().collect(),
            max_depth: None,
        }
    }
}

impl ImpactConfig {
    pub fn with_types(types: impl IntoIterator<Item = LinkType>) -> Self {
        Self {
            types: types.into_iter().collect(),
            max_depth: None,
        }
    }

    pub fn depth(mut self, max_depth: u32) -> Self {
        self.max_depth = Some(max_depth);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ItemStatus {
    Pending,
    Resolved,
    Waived,
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    Resolved,
    Waived,
}

impl Resolution {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "resolved" => Some(Resolution::Resolved),
            "waived" => Some(Resolution::Waived),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactItem {
    pub node: ArtifactId,
    pub distance: u32,
    pub path: Vec<PathStep>,
    pub status: ItemStatus,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactSet {
    pub seeds: BTreeSet<ArtifactId>,
    pub config: ImpactConfig,
    pub computed_at: u64,
    pub items: Vec<ImpactItem>,
}

impl ImpactSet {
    pub fn item(&self, node: &ArtifactId) -> Option<&ImpactItem> {
        self.items.iter().find(|i| &i.node == node)
    }

    pub fn node_ids(&self) -> Vec<&ArtifactId> {
        self.items.iter().map(|i| &i.node).collect()
    }

    fn sort(&mut self) {
        self.items
            .sort_by(|a, b| (a.distance, &a.node).cmp(&(b.distance, &b.node)));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CrState {
    Draft,
    Analyzed,
    Approved,
    Implementing,
    Verified,
    Closed,
    Rejected,
}

impl CrState {
    pub const ALL: [CrState; 7] = [
        CrState::Draft,
        CrState::Analyzed,
        CrState::Approved,
        CrState::Implementing,
        CrState::Verified,
        CrState::Closed,
        CrState::Rejected,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.to_string().eq_ignore_ascii_case(s))
    }

    /// The lifecycle edges, before guards.
    pub fn can_move_to(self, to: CrState) -> bool {
        use CrState::*;
        matches!(
            (self, to),
            (Draft, Analyzed)
                | (Analyzed, Approved)
                | (Approved, Implementing)
                | (Implementing, Verified)
                | (Verified, Closed)
                | (Draft, Rejected)
                | (Analyzed, Rejected)
        )
    }

    /// States in which the impact map is still kept current.
    pub fn is_open(self) -> bool {
        matches!(
            self,
            CrState::Draft | CrState::Analyzed | CrState::Approved | CrState::Implementing
        )
    }
}

impl fmt::Display for CrState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRequest {
    pub cr_id: String,
    pub title: String,
    pub description: String,
    pub state: CrState,
    pub impact: Option<ImpactSet>,
    pub created: Timestamp,
    pub updated: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrError {
    #[error("an impact analysis needs at least one seed")]
    EmptySeeds,
    #[error("an impact analysis needs at least one link type")]
    EmptyTypes,
    #[error("unknown or deleted seed {0}")]
    UnknownSeed(ArtifactId),
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition { from: CrState, to: CrState },
    #[error("guard failed: {0}")]
    GuardFailed(String),
    #[error("operation not allowed in state {0}")]
    WrongState(CrState),
    #[error("{0} is not an impact item")]
    UnknownItem(ArtifactId),
    #[error("item {0} is already resolved or waived")]
    AlreadyResolved(ArtifactId),
    #[error("seed {0} has been deleted")]
    SeedDeleted(ArtifactId),
    #[error("no change request {0}")]
    NotFound(String),
}

/// Multi-source breadth-first impact over the allowed link types, following
/// links in both directions. Seeds appear at distance 0; all items start
/// Pending.
pub fn compute_impact(
    graph: &TraceGraph,
    seeds: &BTreeSet<ArtifactId>,
    config: &ImpactConfig,
) -> Result<ImpactSet, CrError> {
    if seeds.is_empty() {
        return Err(CrError::EmptySeeds);
    }
    if config.types.is_empty() {
        return Err(CrError::EmptyTypes);
    }
    if let Some(bad) = seeds.iter().find(|s| !graph.contains_active(s)) {
        return Err(CrError::UnknownSeed(bad.clone()));
    }
    let reached = graph
        .reach(seeds, Direction::Both, config.max_depth, Some(&config.types))
        .expect("seeds checked above");
    Ok(ImpactSet {
        seeds: seeds.clone(),
        config: config.clone(),
        computed_at: graph.graph_revision(),
        items: reached
            .into_iter()
            .map(|r| ImpactItem {
                node: r.id,
                distance: r.distance,
                path: r.path,
                status: ItemStatus::Pending,
                note: String::new(),
            })
            .collect(),
    })
}

impl ChangeRequest {
    pub fn new(
        cr_id: String,
        title: String,
        description: String,
        impact: ImpactSet,
        now: Timestamp,
    ) -> Self {
        Self {
            cr_id,
            title,
            description,
            state: CrState::Draft,
            impact: Some(impact),
            created: now,
            updated: now,
        }
    }

    pub fn unresolved_count(&self) -> usize {
        self.impact.as_ref().map_or(0, |i| {
            i.items
                .iter()
                .filter(|it| matches!(it.status, ItemStatus::Pending | ItemStatus::Stale))
                .count()
        })
    }

    /// Moves along one lifecycle edge, checking its guard.
    pub fn transition(
        &mut self,
        target: CrState,
        graph: &TraceGraph,
        now: Timestamp,
    ) -> Result<(), CrError> {
        if !self.state.can_move_to(target) {
            return Err(CrError::IllegalTransition {
                from: self.state,
                to: target,
            });
        }
        match (self.state, target) {
            (CrState::Draft, CrState::Analyzed) => {
                if !self.impact.as_ref().is_some_and(|i| !i.seeds.is_empty()) {
                    return Err(CrError::GuardFailed("no impact analysis".into()));
                }
            }
            (CrState::Implementing, CrState::Verified) => {
                let n = self.unresolved_count();
                if n > 0 {
                    return Err(CrError::GuardFailed(format!("{n} unresolved")));
                }
            }
            (CrState::Verified, CrState::Closed) => {
                let suspect: BTreeSet<LinkKey> = self
                    .impact
                    .iter()
                    .flat_map(|i| &i.items)
                    .flat_map(|it| graph.suspect_keys_incident(&it.node))
                    .collect();
                if !suspect.is_empty() {
                    return Err(CrError::GuardFailed(format!(
                        "{} suspect link(s) on impacted artifacts",
                        suspect.len()
                    )));
                }
            }
            _ => {}
        }
        self.state = target;
        self.updated = now;
        Ok(())
    }

    /// Records a resolution on one item without touching the graph. See
    /// [`resolve_item`] for the full operation.
    pub fn set_item_resolution(
        &mut self,
        node: &ArtifactId,
        resolution: Resolution,
        note: &str,
        now: Timestamp,
    ) -> Result<(), CrError> {
        if !matches!(
            self.state,
            CrState::Analyzed | CrState::Approved | CrState::Implementing
        ) {
            return Err(CrError::WrongState(self.state));
        }
        let item = self
            .impact
            .as_mut()
            .and_then(|i| i.items.iter_mut().find(|it| &it.node == node))
            .ok_or_else(|| CrError::UnknownItem(node.clone()))?;
        if matches!(item.status, ItemStatus::Resolved | ItemStatus::Waived) {
            return Err(CrError::AlreadyResolved(node.clone()));
        }
        item.status = match resolution {
            Resolution::Resolved => ItemStatus::Resolved,
            Resolution::Waived => ItemStatus::Waived,
        };
        item.note = note.to_string();
        self.updated = now;
        Ok(())
    }

    /// Recomputes the impact set against the current graph. Newly reachable
    /// nodes are added as Pending, Pending nodes no longer reachable become
    /// Stale, and Stale nodes that are reachable again return to Pending.
    /// Resolved and Waived items keep their status either way.
    pub fn recompute(&mut self, graph: &TraceGraph, now: Timestamp) -> Result<RecomputeSummary, CrError> {
        if !self.state.is_open() {
            return Err(CrError::WrongState(self.state));
        }
        let Some(impact) = self.impact.as_mut() else {
            return Err(CrError::WrongState(self.state));
        };
        if let Some(s) = impact.seeds.iter().find(|s| !graph.contains_active(s)) {
            return Err(CrError::SeedDeleted(s.clone()));
        }
        let mut summary = RecomputeSummary::default();
        if graph.graph_revision() <= impact.computed_at {
            return Ok(summary);
        }
        let fresh = compute_impact(graph, &impact.seeds, &impact.config)?;
        let mut fresh_items: BTreeMap<ArtifactId, ImpactItem> =
            fresh.items.into_iter().map(|i| (i.node.clone(), i)).collect();
        for item in &mut impact.items {
            match fresh_items.remove(&item.node) {
                Some(f) => {
                    item.distance = f.distance;
                    item.path = f.path;
                    if item.status == ItemStatus::Stale {
                        item.status = ItemStatus::Pending;
                        summary.revived.push(item.node.clone());
                    }
                }
                None => {
                    if item.status == ItemStatus::Pending {
                        item.status = ItemStatus::Stale;
                        summary.staled.push(item.node.clone());
                    }
                }
            }
        }
        summary.added = fresh_items.keys().cloned().collect();
        impact.items.extend(fresh_items.into_values());
        impact.sort();
        impact.computed_at = graph.graph_revision();
        self.updated = now;
        Ok(summary)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecomputeSummary {
    pub added: Vec<ArtifactId>,
    pub staled: Vec<ArtifactId>,
    pub revived: Vec<ArtifactId>,
}

/// Resolves or waives an impact item. Resolving also clears every suspect
/// link incident to the node; the cleared links are returned.
pub fn resolve_item(
    cr: &mut ChangeRequest,
    graph: &mut TraceGraph,
    node: &ArtifactId,
    resolution: Resolution,
    note: &str,
    now: Timestamp,
) -> Result<Vec<LinkKey>, CrError> {
    cr.set_item_resolution(node, resolution, note, now)?;
    if resolution == Resolution::Resolved {
        let keys = graph.suspect_keys_incident(node);
        Ok(graph.clear_suspects(&keys))
    } else {
        Ok(Vec::new())
    }
}

/// All change requests of a project, in creation order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrRegistry {
    crs: Vec<ChangeRequest>,
    next: u64,
}

impl CrRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_id(&self) -> String {
        format!("CR-{}", self.next + 1)
    }

    pub fn create(
        &mut self,
        graph: &TraceGraph,
        title: &str,
        description: &str,
        seeds: &BTreeSet<ArtifactId>,
        config: &ImpactConfig,
        now: Timestamp,
    ) -> Result<&ChangeRequest, CrError> {
        let impact = compute_impact(graph, seeds, config)?;
        let cr = ChangeRequest::new(self.next_id(), title.into(), description.into(), impact, now);
        self.insert(cr);
        Ok(self.crs.last().expect("just pushed"))
    }

    /// Adds an already-built request, keeping the id counter ahead of it.
    pub fn insert(&mut self, cr: ChangeRequest) {
        if let Some(n) = cr.cr_id.strip_prefix("CR-").and_then(|n| n.parse::<u64>().ok()) {
            self.next = self.next.max(n);
        }
        self.crs.push(cr);
    }

    pub fn get(&self, cr_id: &str) -> Result<&ChangeRequest, CrError> {
        self.crs
            .iter()
            .find(|c| c.cr_id == cr_id)
            .ok_or_else(|| CrError::NotFound(cr_id.to_string()))
    }

    pub fn get_mut(&mut self, cr_id: &str) -> Result<&mut ChangeRequest, CrError> {
        self.crs
            .iter_mut()
            .find(|c| c.cr_id == cr_id)
            .ok_or_else(|| CrError::NotFound(cr_id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ChangeRequest> {
        self.crs.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ChangeRequest> {
        self.crs.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.crs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crs.is_empty()
    }
}
