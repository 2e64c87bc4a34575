//! Requests and response bodies shared by the command line and HTTP front
//! ends. Both render through [`run_query`] and [`run_command`], so the same
//! request against the same state yields the same bytes.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::json;

use crate::change::{compute_impact, CrState, ImpactConfig, Resolution};
use crate::compliance::{build_trace_matrix, check_coverage, export_matrix_csv, CoverageRuleSet, DalLevel};
use crate::events::Event;
use crate::export::export_graph_dot;
use crate::graph::{Direction, LinkKey, TraceLink};
use crate::ingest::IngestFormat;
use crate::model::{ArtifactId, ArtifactKind, LinkType};
use crate::project::{Project, ProjectError, ProjectState};

pub const JSON: &str = "application/json";
pub const TEXT: &str = "text/plain; charset=utf-8";
pub const CSV: &str = "text/csv; charset=utf-8";
pub const DOT: &str = "text/vnd.graphviz; charset=utf-8";

/// A rendered response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Body {
    pub content_type: &'static str,
    pub text: String,
}

impl Body {
    pub fn json<T: Serialize>(value: &T) -> Self {
        Body {
            content_type: JSON,
            text: json_text(value),
        }
    }

    fn with(content_type: &'static str, text: String) -> Self {
        Body { content_type, text }
    }
}

/// Pretty JSON with a trailing newline.
pub fn json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn error_body(e: &ProjectError) -> Body {
    Body::json(&json!({
        "error_code": e.error_code(),
        "message": e.to_string(),
        "detail": e.detail(),
    }))
}

fn invalid(msg: String) -> ProjectError {
    ProjectError::Validation(msg)
}

/// Comma- or whitespace-separated link type names. Empty input means none.
pub fn parse_types(s: &str) -> Result<BTreeSet<LinkType>, ProjectError> {
    s.split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| LinkType::parse(t).map_err(|e| invalid(e.to_string())))
        .collect()
}

pub fn parse_kind(s: &str) -> Result<ArtifactKind, ProjectError> {
    ArtifactKind::parse_loose(s).map_err(|e| invalid(e.to_string()))
}

pub fn parse_kinds(s: &str) -> Result<BTreeSet<ArtifactKind>, ProjectError> {
    s.split([',', ' ']).filter(|t| !t.is_empty()).map(parse_kind).collect()
}

pub fn parse_id(s: &str) -> Result<ArtifactId, ProjectError> {
    ArtifactId::new(s).map_err(|e| invalid(e.to_string()))
}

pub fn parse_dal(s: &str) -> Result<DalLevel, ProjectError> {
    DalLevel::parse(s).ok_or_else(|| invalid(format!("unknown DAL {s:?}, expected A-E")))
}

pub fn parse_state(s: &str) -> Result<CrState, ProjectError> {
    CrState::parse(s).ok_or_else(|| invalid(format!("unknown state {s:?}")))
}

pub fn parse_resolution(s: &str) -> Result<Resolution, ProjectError> {
    Resolution::parse(s).ok_or_else(|| invalid(format!("resolution must be resolved or waived, got {s:?}")))
}

pub fn parse_format(s: &str) -> Result<IngestFormat, ProjectError> {
    IngestFormat::parse(s).ok_or_else(|| invalid(format!("unknown format {s:?}, expected csv|reqif|issues|vcslog")))
}

pub fn parse_direction(s: &str) -> Result<Direction, ProjectError> {
    Direction::parse(s).ok_or_else(|| invalid(format!("unknown direction {s:?}")))
}

pub fn impact_config(types: Option<BTreeSet<LinkType>>, max_depth: Option<u32>) -> ImpactConfig {
    ImpactConfig {
        types: types.unwrap_or_else(|| LinkType::ALL.into_iter().collect()),
        max_depth,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Json,
}

impl GraphFormat {
    pub fn parse(s: &str) -> Result<Self, ProjectError> {
        match s {
            "dot" => Ok(GraphFormat::Dot),
            "json" => Ok(GraphFormat::Json),
            _ => Err(invalid(format!("unknown graph format {s:?}, expected dot|json"))),
        }
    }
}

/// Read-only requests.
#[derive(Debug, Clone)]
pub enum Query {
    ListNodes {
        kind: Option<ArtifactKind>,
        q: Option<String>,
    },
    Node(ArtifactId),
    Neighbors {
        id: ArtifactId,
        direction: Direction,
        types: Option<BTreeSet<LinkType>>,
    },
    Impact {
        seeds: BTreeSet<ArtifactId>,
        config: ImpactConfig,
    },
    ListCrs,
    Cr(String),
    ListBaselines,
    BaselineIndex(String),
    BaselineDiff {
        a: String,
        b: String,
    },
    Coverage {
        dal: DalLevel,
        ruleset: CoverageRuleSet,
    },
    Matrix {
        rows: ArtifactKind,
        cols: ArtifactKind,
        types: BTreeSet<LinkType>,
        csv: bool,
    },
    ExportGraph {
        format: GraphFormat,
        kinds: Option<BTreeSet<ArtifactKind>>,
        types: Option<BTreeSet<LinkType>>,
    },
}

#[derive(Serialize)]
struct NodeLinks<'a> {
    outgoing: Vec<&'a TraceLink>,
    incoming: Vec<&'a TraceLink>,
}

#[derive(Serialize)]
struct Neighbor<'a> {
    link: &'a TraceLink,
    neighbor: &'a ArtifactId,
}

pub fn run_query(state: &ProjectState, query: &Query) -> Result<Body, ProjectError> {
    let g = &state.graph;
    let node_of = |id: &ArtifactId| {
        g.node(id)
            .ok_or_else(|| ProjectError::NotFound(format!("no artifact {id}")))
    };
    Ok(match query {
        Query::ListNodes { kind, q } => {
            let needle = q.as_deref().map(str::to_lowercase);
            let nodes: Vec<_> = g
                .nodes()
                .filter(|n| kind.is_none_or(|k| n.kind == k))
                .filter(|n| {
                    needle.as_deref().is_none_or(|q| {
                        n.id.as_str().to_lowercase().contains(q) || n.title.to_lowercase().contains(q)
                    })
                })
                .collect();
            Body::json(&nodes)
        }
        Query::Node(id) => {
            let node = node_of(id)?;
            let links = NodeLinks {
                outgoing: g.outgoing_keys(id).filter_map(|k| g.link(k)).collect(),
                incoming: g.incoming_keys(id).filter_map(|k| g.link(k)).collect(),
            };
            Body::json(&json!({ "node": node, "links": links }))
        }
        Query::Neighbors { id, direction, types } => {
            let list: Vec<Neighbor> = g
                .neighbors(id, *direction, types.as_ref())?
                .into_iter()
                .map(|(link, neighbor)| Neighbor { link, neighbor })
                .collect();
            Body::json(&list)
        }
        Query::Impact { seeds, config } => Body::json(&compute_impact(g, seeds, config)?),
        Query::ListCrs => Body::json(&state.crs.iter().collect::<Vec<_>>()),
        Query::Cr(id) => Body::json(state.crs.get(id)?),
        Query::ListBaselines => Body::json(&state.baselines.iter().collect::<Vec<_>>()),
        Query::BaselineIndex(id) => Body::with(TEXT, state.baselines.get(id)?.index.clone()),
        Query::BaselineDiff { a, b } => Body::json(&state.baselines.diff(a, b)?),
        Query::Coverage { dal, ruleset } => Body::json(&check_coverage(g, *dal, ruleset)),
        Query::Matrix { rows, cols, types, csv } => {
            let m = build_trace_matrix(g, *rows, *cols, types)?;
            if *csv {
                Body::with(CSV, export_matrix_csv(&m))
            } else {
                Body::json(&m)
            }
        }
        Query::ExportGraph { format, kinds, types } => match format {
            GraphFormat::Json => Body::with(JSON, g.to_json()),
            GraphFormat::Dot => Body::with(DOT, export_graph_dot(g, kinds.as_ref(), types.as_ref())),
        },
    })
}

pub fn events_body(events: &[Event]) -> Body {
    Body::json(&events)
}

/// State-changing requests.
#[derive(Debug, Clone)]
pub enum Command {
    Ingest {
        format: IngestFormat,
        content: Vec<u8>,
    },
    AddLink(LinkKey),
    RemoveLink(LinkKey),
    CreateCr {
        title: String,
        description: String,
        seeds: BTreeSet<ArtifactId>,
        config: ImpactConfig,
    },
    TransitionCr {
        cr_id: String,
        target: CrState,
    },
    ResolveItem {
        cr_id: String,
        node: ArtifactId,
        resolution: Resolution,
        note: String,
    },
    CreateBaseline {
        name: String,
    },
}

impl Command {
    /// Whether success means a new resource.
    pub fn creates(&self) -> bool {
        matches!(
            self,
            Command::AddLink(_) | Command::CreateCr { .. } | Command::CreateBaseline { .. }
        )
    }
}

pub fn run_command(project: &mut Project, command: Command) -> Result<Body, ProjectError> {
    Ok(match command {
        Command::Ingest { format, content } => Body::json(&project.ingest(format, &content)?),
        Command::AddLink(k) => {
            let key = project.add_link(&k.from, &k.to, k.link_type)?;
            Body::json(project.graph().link(&key).expect("just added"))
        }
        Command::RemoveLink(k) => {
            project.remove_link(&k)?;
            Body::json(&k)
        }
        Command::CreateCr {
            title,
            description,
            seeds,
            config,
        } => {
            let cr = project.create_cr(&title, &description, &seeds, &config)?;
            Body::json(project.state().crs.get(&cr.cr_id)?)
        }
        Command::TransitionCr { cr_id, target } => {
            project.transition_cr(&cr_id, target)?;
            Body::json(project.state().crs.get(&cr_id)?)
        }
        Command::ResolveItem {
            cr_id,
            node,
            resolution,
            note,
        } => Body::json(&project.resolve_item(&cr_id, &node, resolution, &note)?),
        Command::CreateBaseline { name } => Body::json(&project.create_baseline(&name)?),
    })
}
