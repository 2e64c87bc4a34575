//! Event-sourced project persistence.
//!
//! On disk a project is a directory:
//!
//! ```text
//! <home>/<project>/project.json     metadata
//! <home>/<project>/events.log       one JSON event per line, hash-chained
//! <home>/<project>/baselines/       BL-<n>.idx, canonical index bytes
//! ```
//!
//! The log is the source of truth. Opening a project replays it from empty
//! state; every replayed operation is re-executed and its result checked
//! against the recorded payload.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::baseline::{Baseline, BaselineError, BaselineRegistry};
use crate::change::{
    compute_impact, ChangeRequest, CrError, CrRegistry, CrState, ImpactConfig, RecomputeSummary,
    Resolution,
};
use crate::compliance::{IncompatibleTypes, RuleError};
use crate::events::{read_log, Event, EventKind, LogError, GENESIS_HASH};
use crate::graph::{GraphError, GraphMutation, LinkKey, NodeInput, TraceGraph, UpsertOutcome};
use crate::ingest::{decode_utf8, merge_into_graph, parse_export, IngestFormat, IngestReport, Severity};
use crate::model::{ArtifactId, LinkType};
use crate::time::{Clock, SystemClock, Timestamp};

pub const HOME_ENV: &str = "TRACEFORGE_HOME";
pub const DEFAULT_HOME: &str = ".traceforge";
const LOG_FILE: &str = "events.log";
const META_FILE: &str = "project.json";
const BASELINE_DIR: &str = "baselines";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProjectError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NotFound(String),
    #[error("project {0:?} already exists")]
    ProjectExists(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Cr(#[from] CrError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Matrix(#[from] IncompatibleTypes),
    #[error("ingest reported {} error(s)", .0.diagnostics.iter().filter(|d| d.severity == Severity::Error).count())]
    Ingest(Box<IngestReport>),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("event {seq} does not replay: {message}")]
    BadEvent { seq: u64, message: String },
}

impl ProjectError {
    pub fn error_code(&self) -> &'static str {
        match self {
            ProjectError::Validation(_) => "ValidationError",
            ProjectError::NotFound(_) => "NotFound",
            ProjectError::ProjectExists(_) => "ProjectExists",
            ProjectError::Graph(e) => match e {
                GraphError::KindChanged { .. } => "KindChanged",
                GraphError::DanglingEndpoint(_) => "DanglingEndpoint",
                GraphError::TypeMatrixViolation { .. } => "TypeMatrixViolation",
                GraphError::Duplicate(_) => "Duplicate",
                GraphError::SelfLink(_) => "SelfLink",
                GraphError::NotFound(_) => "NotFound",
                GraphError::AlreadyDeleted(_) => "AlreadyDeleted",
                GraphError::LinkNotFound(_) => "LinkNotFound",
            },
            ProjectError::Cr(e) => match e {
                CrError::EmptySeeds => "EmptySeeds",
                CrError::EmptyTypes => "EmptyTypes",
                CrError::UnknownSeed(_) => "UnknownSeed",
                CrError::IllegalTransition { .. } => "IllegalTransition",
                CrError::GuardFailed(_) => "GuardFailed",
                CrError::WrongState(_) => "WrongState",
                CrError::UnknownItem(_) => "UnknownItem",
                CrError::AlreadyResolved(_) => "AlreadyResolved",
                CrError::SeedDeleted(_) => "SeedDeleted",
                CrError::NotFound(_) => "NotFound",
            },
            ProjectError::Baseline(e) => match e {
                BaselineError::DuplicateName(_) => "DuplicateName",
                BaselineError::BadName => "ValidationError",
                BaselineError::NotFound(_) => "NotFound",
                BaselineError::Corrupt(..) => "StorageFailure",
            },
            ProjectError::Rules(e) => match e {
                RuleError::SyntaxError { .. } => "SyntaxError",
                RuleError::UnknownKind { .. } => "UnknownKind",
                RuleError::UnknownLinkType { .. } => "UnknownLinkType",
                RuleError::BadDalSet { .. } => "BadDalSet",
            },
            ProjectError::Matrix(_) => "IncompatibleTypes",
            ProjectError::Ingest(_) => "ParseErrors",
            ProjectError::Storage(_) => "StorageFailure",
            ProjectError::Log(LogError::ChainBroken(_)) => "ChainBroken",
            ProjectError::Log(LogError::TornTail(_)) => "TornTail",
            ProjectError::BadEvent { .. } => "BadEvent",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self.error_code() {
            "NotFound" | "LinkNotFound" | "UnknownItem" => 404,
            "ProjectExists" | "KindChanged" | "Duplicate" | "AlreadyDeleted" | "IllegalTransition"
            | "GuardFailed" | "WrongState" | "AlreadyResolved" | "SeedDeleted" | "DuplicateName" => 409,
            "ParseErrors" | "SyntaxError" | "UnknownKind" | "UnknownLinkType" | "BadDalSet" => 422,
            "StorageFailure" | "ChainBroken" | "TornTail" | "BadEvent" => 500,
            _ => 400,
        }
    }

    /// 2 for rejected requests, 3 for unparseable input, 4 for storage.
    pub fn exit_code(&self) -> u8 {
        match self.http_status() {
            422 => 3,
            500 => 4,
            _ => 2,
        }
    }

    pub fn detail(&self) -> Value {
        match self {
            ProjectError::Ingest(report) => serde_json::to_value(report).expect("serializable"),
            ProjectError::Rules(e) => json!({ "line": e.line() }),
            ProjectError::Cr(CrError::GuardFailed(reason)) => json!({ "reason": reason }),
            ProjectError::Cr(CrError::IllegalTransition { from, to }) => {
                json!({ "from": from, "to": to })
            }
            ProjectError::Log(LogError::ChainBroken(seq) | LogError::TornTail(seq))
            | ProjectError::BadEvent { seq, .. } => json!({ "seq": seq }),
            _ => Value::Null,
        }
    }
}

fn storage(e: impl std::fmt::Display) -> ProjectError {
    ProjectError::Storage(e.to_string())
}

/// Project names become directory names.
pub fn validate_project_name(name: &str) -> Result<(), ProjectError> {
    let ok = !name.is_empty()
        && name.len() <= 64
        && !name.starts_with('.')
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(ProjectError::Validation(format!(
            "project name {name:?} must be 1-64 of [A-Za-z0-9._-] and not start with '.'"
        )))
    }
}

/// Everything an event log reconstructs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectState {
    pub name: String,
    pub graph: TraceGraph,
    pub crs: CrRegistry,
    pub baselines: BaselineRegistry,
}

impl ProjectState {
    pub fn empty(name: &str) -> Self {
        Self {
            name: name.to_string(),
            graph: TraceGraph::new(),
            crs: CrRegistry::new(),
            baselines: BaselineRegistry::new(),
        }
    }

    /// A read-only copy for concurrent readers.
    pub fn snapshot(&self) -> ProjectState {
        ProjectState {
            graph: self.graph.snapshot(),
            ..self.clone()
        }
    }

    /// Re-executes one recorded event and checks it reproduces the payload.
    pub fn apply(&mut self, ev: &Event) -> Result<(), String> {
        let p = &ev.payload;
        let g = &mut self.graph;
        match ev.kind {
            EventKind::NodeUpserted => {
                let node: NodeInput = field(p, "node")?;
                let want_outcome: Value = p.get("outcome").cloned().ok_or("missing outcome")?;
                let out = g.upsert_node(node.clone()).map_err(|e| e.to_string())?;
                let got = serde_json::to_value(out).expect("serializable");
                expect_eq("outcome", &got["outcome"], &want_outcome)?;
                if let UpsertOutcome::Updated { marked_suspect } = out {
                    expect_eq("marked_suspect", &json!(marked_suspect), &p["marked_suspect"])?;
                }
                let n = g.node(&node.id).expect("just upserted");
                expect_eq("revision", &json!(n.revision), &p["revision"])?;
                expect_eq("content_hash", &json!(n.content_hash), &p["content_hash"])?;
            }
            EventKind::SuspectMarked => {
                let id: ArtifactId = field(p, "node")?;
                let links: Vec<LinkKey> = field(p, "links")?;
                let incident: Vec<LinkKey> = g.incident_keys(&id).into_iter().collect();
                if links != incident || links.iter().any(|k| !g.link(k).is_some_and(|l| l.suspect)) {
                    return Err("suspect marks do not match incident links".into());
                }
            }
            EventKind::NodeRemoved => {
                let id: ArtifactId = field(p, "id")?;
                let removed = g.remove_node(&id).map_err(|e| e.to_string())?;
                expect_eq("removed", &json!(removed), &p["removed"])?;
            }
            EventKind::LinkAdded => {
                let k: LinkKey = field(p, "link")?;
                g.add_link(&k.from, &k.to, k.link_type).map_err(|e| e.to_string())?;
            }
            EventKind::LinkRemoved => {
                let k: LinkKey = field(p, "link")?;
                g.remove_link(&k).map_err(|e| e.to_string())?;
            }
            EventKind::SuspectCleared => {
                let links: Vec<LinkKey> = field(p, "links")?;
                let cleared = g.clear_suspects(&links);
                if cleared != links || cleared.is_empty() {
                    return Err("cleared links differ".into());
                }
            }
            EventKind::CrCreated => {
                let cr: ChangeRequest = field(p, "cr")?;
                if cr.cr_id != self.crs.next_id() || cr.state != CrState::Draft {
                    return Err(format!("unexpected change request {}", cr.cr_id));
                }
                let impact = cr.impact.as_ref().ok_or("missing impact")?;
                let fresh = compute_impact(g, &impact.seeds, &impact.config).map_err(|e| e.to_string())?;
                if &fresh != impact {
                    return Err("impact set differs".into());
                }
                self.crs.insert(cr);
            }
            EventKind::CrTransitioned => {
                let cr_id: String = field(p, "cr_id")?;
                let from: CrState = field(p, "from")?;
                let to: CrState = field(p, "to")?;
                let cr = self.crs.get_mut(&cr_id).map_err(|e| e.to_string())?;
                if cr.state != from {
                    return Err(format!("{cr_id} is {} not {from}", cr.state));
                }
                cr.transition(to, g, ev.ts).map_err(|e| e.to_string())?;
            }
            EventKind::CrItemResolved => {
                let cr_id: String = field(p, "cr_id")?;
                let node: ArtifactId = field(p, "node")?;
                let resolution: Resolution = field(p, "resolution")?;
                let note: String = field(p, "note")?;
                let cr = self.crs.get_mut(&cr_id).map_err(|e| e.to_string())?;
                cr.set_item_resolution(&node, resolution, &note, ev.ts)
                    .map_err(|e| e.to_string())?;
            }
            EventKind::CrRecomputed => {
                let cr_id: String = field(p, "cr_id")?;
                let want: RecomputeSummary = field(p, "summary")?;
                let cr = self.crs.get_mut(&cr_id).map_err(|e| e.to_string())?;
                let got = cr.recompute(g, ev.ts).map_err(|e| e.to_string())?;
                if got != want {
                    return Err("recompute summary differs".into());
                }
            }
            EventKind::BaselineCreated => {
                let want: Baseline = field(p, "baseline")?;
                let got = self
                    .baselines
                    .prepare(g, &self.name, &want.name, ev.ts)
                    .map_err(|e| e.to_string())?;
                let mut cmp = got.clone();
                cmp.index = String::new();
                if cmp != want {
                    return Err("baseline differs".into());
                }
                self.baselines.insert(got);
            }
            EventKind::Ingested => {}
        }
        Ok(())
    }
}

fn field<T: serde::de::DeserializeOwned>(payload: &Value, name: &str) -> Result<T, String> {
    let v = payload.get(name).ok_or_else(|| format!("missing {name}"))?;
    serde_json::from_value(v.clone()).map_err(|e| format!("{name}: {e}"))
}

fn expect_eq(what: &str, got: &Value, want: &Value) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: replay gave {got}, log has {want}"))
    }
}

/// Rebuilds project state from a verified event sequence.
pub fn replay(name: &str, events: &[Event]) -> Result<ProjectState, ProjectError> {
    let mut state = ProjectState::empty(name);
    for ev in events {
        state
            .apply(ev)
            .map_err(|message| ProjectError::BadEvent { seq: ev.seq, message })?;
    }
    Ok(state)
}

/// Events produced by one command, before sequencing.
struct Tx {
    now: Timestamp,
    pending: Vec<(EventKind, Value)>,
}

impl Tx {
    fn push(&mut self, kind: EventKind, payload: Value) {
        self.pending.push((kind, payload));
    }

    /// Moves recorded graph mutations into the pending events.
    fn drain(&mut self, graph: &mut TraceGraph) {
        for m in graph.take_journal() {
            match m {
                GraphMutation::NodeUpserted {
                    node,
                    outcome,
                    revision,
                    content_hash,
                    marked,
                } => {
                    let mut payload = Map::new();
                    let id = node.id.clone();
                    payload.insert("node".into(), json!(node));
                    if let Value::Object(o) = json!(outcome) {
                        payload.extend(o);
                    }
                    payload.insert("revision".into(), json!(revision));
                    payload.insert("content_hash".into(), json!(content_hash));
                    self.push(EventKind::NodeUpserted, Value::Object(payload));
                    if !marked.is_empty() {
                        self.push(EventKind::SuspectMarked, json!({ "node": id, "links": marked }));
                    }
                }
                GraphMutation::NodeRemoved { id, removed } => {
                    self.push(EventKind::NodeRemoved, json!({ "id": id, "removed": removed }))
                }
                GraphMutation::LinkAdded { link } => {
                    self.push(EventKind::LinkAdded, json!({ "link": link }))
                }
                GraphMutation::LinkRemoved { link } => {
                    self.push(EventKind::LinkRemoved, json!({ "link": link }))
                }
                GraphMutation::SuspectCleared { links } => {
                    self.push(EventKind::SuspectCleared, json!({ "links": links }))
                }
            }
        }
    }
}

/// Locates projects under a home directory.
#[derive(Clone)]
pub struct Store {
    home: PathBuf,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("home", &self.home).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ProjectMeta {
    name: String,
    created: Timestamp,
    format: String,
}

const META_FORMAT: &str = "traceforge-project/1";

impl Store {
    pub fn new(home: impl Into<PathBuf>) -> Self {
        Self {
            home: home.into(),
            clock: Arc::new(SystemClock),
        }
    }

    /// Uses `$TRACEFORGE_HOME`, or `.traceforge` in the working directory.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(HOME_ENV).map_or_else(|| PathBuf::from(DEFAULT_HOME), PathBuf::from))
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn home(&self) -> &Path {
        &self.home
    }

    pub fn project_dir(&self, name: &str) -> PathBuf {
        self.home.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.project_dir(name).join(META_FILE).is_file()
    }

    pub fn create_project(&self, name: &str) -> Result<Project, ProjectError> {
        validate_project_name(name)?;
        if self.exists(name) {
            return Err(ProjectError::ProjectExists(name.to_string()));
        }
        let dir = self.project_dir(name);
        fs::create_dir_all(dir.join(BASELINE_DIR)).map_err(storage)?;
        let meta = ProjectMeta {
            name: name.to_string(),
            created: self.clock.now(),
            format: META_FORMAT.to_string(),
        };
        let text = serde_json::to_string_pretty(&meta).expect("serializable") + "\n";
        fs::write(dir.join(LOG_FILE), b"").map_err(storage)?;
        fs::write(dir.join(META_FILE), text).map_err(storage)?;
        self.open_project(name)
    }

    /// Opens a project, replaying its log. A torn final line is truncated.
    pub fn open_project(&self, name: &str) -> Result<Project, ProjectError> {
        validate_project_name(name)?;
        if !self.exists(name) {
            return Err(ProjectError::NotFound(format!("no project {name:?}")));
        }
        let dir = self.project_dir(name);
        let log_path = dir.join(LOG_FILE);
        let bytes = fs::read(&log_path).map_err(storage)?;
        let read = read_log(&bytes, true)?;
        if let Some(len) = read.truncate_to {
            let f = OpenOptions::new().write(true).open(&log_path).map_err(storage)?;
            f.set_len(len as u64).map_err(storage)?;
            f.sync_all().map_err(storage)?;
        }
        let state = replay(name, &read.events)?;
        let log = OpenOptions::new().append(true).open(&log_path).map_err(storage)?;
        Ok(Project {
            dir,
            state: journaled(state),
            events: read.events,
            log,
            clock: self.clock.clone(),
            warnings: read.warnings,
        })
    }

    pub fn open_or_create(&self, name: &str) -> Result<Project, ProjectError> {
        if self.exists(name) {
            self.open_project(name)
        } else {
            self.create_project(name)
        }
    }

    pub fn list_projects(&self) -> Result<Vec<String>, ProjectError> {
        let entries = match fs::read_dir(&self.home) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(storage(e)),
        };
        let mut names = Vec::new();
        for entry in entries {
            let name = entry.map_err(storage)?.file_name().to_string_lossy().into_owned();
            if validate_project_name(&name).is_ok() && self.exists(&name) {
                names.push(name);
            }
        }
        names.sort();
        Ok(names)
    }

    /// Strict end-to-end check of a project's log: no torn tail, chain intact,
    /// every event replays, and baseline files match their recorded hashes.
    pub fn verify_project(&self, name: &str) -> Result<VerifyReport, ProjectError> {
        validate_project_name(name)?;
        if !self.exists(name) {
            return Err(ProjectError::NotFound(format!("no project {name:?}")));
        }
        let dir = self.project_dir(name);
        let bytes = fs::read(dir.join(LOG_FILE)).map_err(storage)?;
        let read = read_log(&bytes, false)?;
        let state = replay(name, &read.events)?;
        let mut baseline_files = Vec::new();
        for b in state.baselines.iter() {
            let path = dir.join(BASELINE_DIR).join(format!("{}.idx", b.baseline_id));
            let ok = fs::read_to_string(&path).is_ok_and(|text| text == b.index);
            baseline_files.push(BaselineFileCheck {
                baseline_id: b.baseline_id.clone(),
                ok,
            });
        }
        Ok(VerifyReport {
            project: name.to_string(),
            events: read.events.len() as u64,
            head: read.events.last().map_or(GENESIS_HASH.to_string(), |e| e.hash.clone()),
            graph_revision: state.graph.graph_revision(),
            baseline_files,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BaselineFileCheck {
    pub baseline_id: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub project: String,
    pub events: u64,
    pub head: String,
    pub graph_revision: u64,
    pub baseline_files: Vec<BaselineFileCheck>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.baseline_files.iter().all(|b| b.ok)
    }
}

fn journaled(mut state: ProjectState) -> ProjectState {
    state.graph.enable_journal();
    state
}

/// An open project: current state plus the writer end of its log.
pub struct Project {
    dir: PathBuf,
    state: ProjectState,
    events: Vec<Event>,
    log: File,
    clock: Arc<dyn Clock>,
    warnings: Vec<String>,
}

impl std::fmt::Debug for Project {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Project")
            .field("name", &self.state.name)
            .field("events", &self.events.len())
            .finish()
    }
}

impl Project {
    pub fn name(&self) -> &str {
        &self.state.name
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &ProjectState {
        &self.state
    }

    pub fn graph(&self) -> &TraceGraph {
        &self.state.graph
    }

    /// Warnings raised while opening (torn-line recovery).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Events with seq greater than `since`, in order.
    pub fn events_since(&self, since: u64) -> &[Event] {
        let from = (since as usize).min(self.events.len());
        &self.events[from..]
    }

    pub fn last_seq(&self) -> u64 {
        self.events.len() as u64
    }

    /// Runs one command: mutate, keep open change requests current, then
    /// persist every resulting event before returning. Events are written
    /// even when the command reports an error after partial application
    /// (ingest with bad records).
    fn run<T>(
        &mut self,
        f: impl FnOnce(&mut ProjectState, &mut Tx) -> Result<T, ProjectError>,
    ) -> Result<T, ProjectError> {
        let mut tx = Tx {
            now: self.clock.now(),
            pending: Vec::new(),
        };
        let result = f(&mut self.state, &mut tx);
        tx.drain(&mut self.state.graph);
        if !tx.pending.is_empty() {
            self.recompute_open_crs(&mut tx);
        }
        self.commit(tx)?;
        result
    }

    fn recompute_open_crs(&mut self, tx: &mut Tx) {
        let rev = self.state.graph.graph_revision();
        let graph = &self.state.graph;
        for cr in self.state.crs.iter_mut() {
            let stale = cr.impact.as_ref().is_some_and(|i| i.computed_at < rev);
            if !cr.state.is_open() || !stale {
                continue;
            }
            // a request whose seed was deleted keeps its last impact map
            if let Ok(summary) = cr.recompute(graph, tx.now) {
                tx.push(
                    EventKind::CrRecomputed,
                    json!({ "cr_id": cr.cr_id, "summary": summary, "computed_at": rev }),
                );
            }
        }
    }

    fn commit(&mut self, tx: Tx) -> Result<(), ProjectError> {
        if tx.pending.is_empty() {
            return Ok(());
        }
        let mut new_events = Vec::with_capacity(tx.pending.len());
        let mut buf = String::new();
        for (kind, payload) in tx.pending {
            let prev = new_events
                .last()
                .or(self.events.last())
                .map_or(GENESIS_HASH, |e: &Event| e.hash.as_str())
                .to_string();
            let seq = self.events.len() as u64 + new_events.len() as u64 + 1;
            let ev = Event::new(seq, tx.now, kind, payload, &prev);
            buf.push_str(&ev.to_line());
            buf.push('\n');
            new_events.push(ev);
        }
        let written = self
            .log
            .write_all(buf.as_bytes())
            .and_then(|_| self.log.sync_data());
        if let Err(e) = written {
            // memory is ahead of disk; fall back to what the log holds
            let name = self.state.name.clone();
            if let Ok(bytes) = fs::read(self.dir.join(LOG_FILE)) {
                if let Ok(read) = read_log(&bytes, true) {
                    if let Ok(state) = replay(&name, &read.events) {
                        self.state = journaled(state);
                        self.events = read.events;
                    }
                }
            }
            return Err(storage(e));
        }
        self.events.extend(new_events);
        Ok(())
    }

    pub fn upsert_node(&mut self, node: NodeInput) -> Result<UpsertOutcome, ProjectError> {
        self.run(|s, _| Ok(s.graph.upsert_node(node)?))
    }

    pub fn remove_node(&mut self, id: &ArtifactId) -> Result<Vec<LinkKey>, ProjectError> {
        self.run(|s, _| Ok(s.graph.remove_node(id)?))
    }

    pub fn add_link(&mut self, from: &ArtifactId, to: &ArtifactId, link_type: LinkType) -> Result<LinkKey, ProjectError> {
        self.run(|s, _| Ok(s.graph.add_link(from, to, link_type)?.key()))
    }

    pub fn remove_link(&mut self, key: &LinkKey) -> Result<LinkKey, ProjectError> {
        self.run(|s, _| Ok(s.graph.remove_link(key)?.key()))
    }

    /// Parses and merges one export. Valid records are applied even when
    /// others fail; any error diagnostic turns the result into
    /// [`ProjectError::Ingest`] carrying the full report.
    pub fn ingest(&mut self, format: IngestFormat, content: &[u8]) -> Result<IngestReport, ProjectError> {
        let text = match decode_utf8(content) {
            Ok(t) => t,
            Err(d) => {
                return Err(ProjectError::Ingest(Box::new(IngestReport {
                    counts: Default::default(),
                    diagnostics: vec![d],
                })))
            }
        };
        self.run(|s, tx| {
            let (batch, mut diagnostics) = parse_export(format, text);
            let mut report = merge_into_graph(&mut s.graph, &batch);
            diagnostics.append(&mut report.diagnostics);
            report.diagnostics = diagnostics;
            tx.drain(&mut s.graph);
            let count = |sev| report.diagnostics.iter().filter(|d| d.severity == sev).count();
            tx.push(
                EventKind::Ingested,
                json!({
                    "format": format,
                    "counts": report.counts,
                    "errors": count(Severity::Error),
                    "warnings": count(Severity::Warning),
                }),
            );
            if report.has_errors() {
                Err(ProjectError::Ingest(Box::new(report)))
            } else {
                Ok(report)
            }
        })
    }

    pub fn create_cr(
        &mut self,
        title: &str,
        description: &str,
        seeds: &BTreeSet<ArtifactId>,
        config: &ImpactConfig,
    ) -> Result<ChangeRequest, ProjectError> {
        if title.trim().is_empty() {
            return Err(ProjectError::Validation("title must not be empty".into()));
        }
        self.run(|s, tx| {
            let cr = s
                .crs
                .create(&s.graph, title, description, seeds, config, tx.now)?
                .clone();
            tx.push(EventKind::CrCreated, json!({ "cr": cr }));
            Ok(cr)
        })
    }

    pub fn transition_cr(&mut self, cr_id: &str, target: CrState) -> Result<ChangeRequest, ProjectError> {
        self.run(|s, tx| {
            let cr = s.crs.get_mut(cr_id)?;
            let from = cr.state;
            cr.transition(target, &s.graph, tx.now)?;
            tx.push(
                EventKind::CrTransitioned,
                json!({ "cr_id": cr_id, "from": from, "to": target }),
            );
            Ok(cr.clone())
        })
    }

    /// Resolves or waives an impact item; resolving clears the node's
    /// suspect links.
    pub fn resolve_item(
        &mut self,
        cr_id: &str,
        node: &ArtifactId,
        resolution: Resolution,
        note: &str,
    ) -> Result<ResolveOutcome, ProjectError> {
        self.run(|s, tx| {
            let cr = s.crs.get_mut(cr_id)?;
            cr.set_item_resolution(node, resolution, note, tx.now)?;
            tx.push(
                EventKind::CrItemResolved,
                json!({ "cr_id": cr_id, "node": node, "resolution": resolution, "note": note }),
            );
            let cleared = if resolution == Resolution::Resolved {
                let keys = s.graph.suspect_keys_incident(node);
                s.graph.clear_suspects(&keys)
            } else {
                Vec::new()
            };
            tx.drain(&mut s.graph);
            Ok(ResolveOutcome {
                cr: s.crs.get(cr_id)?.clone(),
                cleared,
            })
        })
        .map(|mut out| {
            // recompute may have run after the closure
            if let Ok(cr) = self.state.crs.get(cr_id) {
                out.cr = cr.clone();
            }
            out
        })
    }

    pub fn create_baseline(&mut self, name: &str) -> Result<Baseline, ProjectError> {
        let dir = self.dir.join(BASELINE_DIR);
        self.run(|s, tx| {
            let b = s.baselines.prepare(&s.graph, &s.name, name, tx.now)?;
            fs::create_dir_all(&dir).map_err(storage)?;
            fs::write(dir.join(format!("{}.idx", b.baseline_id)), &b.index).map_err(storage)?;
            tx.push(EventKind::BaselineCreated, json!({ "baseline": b }));
            s.baselines.insert(b.clone());
            Ok(b)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolveOutcome {
    pub cr: ChangeRequest,
    pub cleared: Vec<LinkKey>,
}
