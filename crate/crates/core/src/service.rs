//! HTTP/JSON service under `/api/v1`.
//!
//! Each project has one writer (a mutex around the open [`Project`]) and a
//! published snapshot that reads are served from. Mutations run on the
//! blocking pool, then republish the snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query as QueryParams, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::api::{
    error_body, events_body, impact_config, parse_dal, parse_direction, parse_format, parse_id,
    parse_kind, parse_kinds, parse_resolution, parse_state, parse_types, run_command, run_query, Body,
    Command, GraphFormat, Query,
};
use crate::compliance::default_ruleset;
use crate::graph::{Direction, LinkKey};
use crate::model::{ArtifactId, LinkType};
use crate::project::{Project, ProjectError, ProjectState, Store};

type Params = QueryParams<BTreeMap<String, String>>;

struct Handle {
    writer: Mutex<Project>,
    snapshot: RwLock<Arc<ProjectState>>,
}

impl Handle {
    fn new(project: Project) -> Self {
        let snap = Arc::new(project.state().snapshot());
        Handle {
            writer: Mutex::new(project),
            snapshot: RwLock::new(snap),
        }
    }

    fn read(&self) -> Arc<ProjectState> {
        self.snapshot.read().expect("snapshot lock").clone()
    }
}

struct App {
    store: Store,
    open: Mutex<BTreeMap<String, Arc<Handle>>>,
}

impl App {
    fn handle(&self, name: &str) -> Result<Arc<Handle>, ProjectError> {
        let mut open = self.open.lock().expect("registry lock");
        if let Some(h) = open.get(name) {
            return Ok(h.clone());
        }
        let h = Arc::new(Handle::new(self.store.open_project(name)?));
        open.insert(name.to_string(), h.clone());
        Ok(h)
    }
}

type AppState = Arc<App>;

struct ApiError(ProjectError);

impl From<ProjectError> for ApiError {
    fn from(e: ProjectError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        respond(status, error_body(&self.0))
    }
}

fn respond(status: StatusCode, body: Body) -> Response {
    (status, [(header::CONTENT_TYPE, body.content_type)], body.text).into_response()
}

type ApiResult = Result<Response, ApiError>;

fn parse_body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ProjectError> {
    serde_json::from_slice(bytes).map_err(|e| ProjectError::Validation(format!("request body: {e}")))
}

fn ids(list: &[String]) -> Result<BTreeSet<ArtifactId>, ProjectError> {
    list.iter().map(|s| parse_id(s)).collect()
}

fn type_list(list: &Option<Vec<String>>) -> Result<Option<BTreeSet<LinkType>>, ProjectError> {
    list.as_ref()
        .map(|v| {
            v.iter()
                .map(|t| LinkType::parse(t).map_err(|e| ProjectError::Validation(e.to_string())))
                .collect()
        })
        .transpose()
}

fn opt_param<'a>(p: &'a BTreeMap<String, String>, key: &str) -> Option<&'a str> {
    p.get(key).map(String::as_str).filter(|s| !s.is_empty())
}

fn required<'a>(p: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str, ProjectError> {
    opt_param(p, key).ok_or_else(|| ProjectError::Validation(format!("missing query parameter {key:?}")))
}

async fn query(app: &App, project: &str, q: Query) -> ApiResult {
    let snap = app.handle(project)?.read();
    Ok(respond(StatusCode::OK, run_query(&snap, &q)?))
}

async fn command(app: AppState, project: String, c: Command) -> ApiResult {
    let handle = app.handle(&project)?;
    let status = if c.creates() { StatusCode::CREATED } else { StatusCode::OK };
    let body = tokio::task::spawn_blocking(move || {
        let mut p = handle.writer.lock().expect("writer lock");
        let out = run_command(&mut p, c);
        *handle.snapshot.write().expect("snapshot lock") = Arc::new(p.state().snapshot());
        out
    })
    .await
    .map_err(|e| ProjectError::Storage(e.to_string()))??;
    Ok(respond(status, body))
}

#[derive(Deserialize)]
struct NewProject {
    name: String,
}

async fn create_project(State(app): State<AppState>, body: Bytes) -> ApiResult {
    let req: NewProject = parse_body(&body)?;
    let project = app.store.create_project(&req.name)?;
    app.open
        .lock()
        .expect("registry lock")
        .insert(req.name.clone(), Arc::new(Handle::new(project)));
    Ok(respond(StatusCode::CREATED, Body::json(&serde_json::json!({ "name": req.name }))))
}

async fn list_projects(State(app): State<AppState>) -> ApiResult {
    Ok(respond(StatusCode::OK, Body::json(&app.store.list_projects()?)))
}

#[derive(Deserialize)]
struct IngestReq {
    format: String,
    content: String,
}

async fn ingest(State(app): State<AppState>, Path(p): Path<String>, body: Bytes) -> ApiResult {
    let req: IngestReq = parse_body(&body)?;
    let c = Command::Ingest {
        format: parse_format(&req.format)?,
        content: req.content.into_bytes(),
    };
    command(app, p, c).await
}

async fn list_nodes(State(app): State<AppState>, Path(p): Path<String>, params: Params) -> ApiResult {
    let q = Query::ListNodes {
        kind: opt_param(&params, "kind").map(parse_kind).transpose()?,
        q: opt_param(&params, "q").map(str::to_string),
    };
    query(&app, &p, q).await
}

async fn get_node(State(app): State<AppState>, Path((p, id)): Path<(String, String)>) -> ApiResult {
    query(&app, &p, Query::Node(parse_id(&id)?)).await
}

async fn neighbors(
    State(app): State<AppState>,
    Path((p, id)): Path<(String, String)>,
    params: Params,
) -> ApiResult {
    let q = Query::Neighbors {
        id: parse_id(&id)?,
        direction: opt_param(&params, "direction")
            .map(parse_direction)
            .transpose()?
            .unwrap_or(Direction::Both),
        types: opt_param(&params, "types").map(parse_types).transpose()?,
    };
    query(&app, &p, q).await
}

#[derive(Deserialize)]
struct LinkReq {
    from: String,
    to: String,
    #[serde(rename = "type")]
    link_type: String,
}

impl LinkReq {
    fn key(&self) -> Result<LinkKey, ProjectError> {
        Ok(LinkKey::new(
            parse_id(&self.from)?,
            LinkType::parse(&self.link_type).map_err(|e| ProjectError::Validation(e.to_string()))?,
            parse_id(&self.to)?,
        ))
    }
}

async fn add_link(State(app): State<AppState>, Path(p): Path<String>, body: Bytes) -> ApiResult {
    let key = parse_body::<LinkReq>(&body)?.key()?;
    command(app, p, Command::AddLink(key)).await
}

async fn remove_link(State(app): State<AppState>, Path(p): Path<String>, body: Bytes) -> ApiResult {
    let key = parse_body::<LinkReq>(&body)?.key()?;
    command(app, p, Command::RemoveLink(key)).await
}

#[derive(Deserialize)]
struct ImpactReq {
    seeds: Vec<String>,
    types: Option<Vec<String>>,
    max_depth: Option<u32>,
}

async fn impact(State(app): State<AppState>, Path(p): Path<String>, body: Bytes) -> ApiResult {
    let req: ImpactReq = parse_body(&body)?;
    let q = Query::Impact {
        seeds: ids(&req.seeds)?,
        config: impact_config(type_list(&req.types)?, req.max_depth),
    };
    query(&app, &p, q).await
}

#[derive(Deserialize)]
struct CrReq {
    title: String,
    #[serde(default)]
    description: String,
    seeds: Vec<String>,
    types: Option<Vec<String>>,
    max_depth: Option<u32>,
}

async fn create_cr(State(app): State<AppState>, Path(p): Path<String>, body: Bytes) -> ApiResult {
    let req: CrReq = parse_body(&body)?;
    let c = Command::CreateCr {
        title: req.title,
        description: req.description,
        seeds: ids(&req.seeds)?,
        config: impact_config(type_list(&req.types)?, req.max_depth),
    };
    command(app, p, c).await
}

async fn list_crs(State(app): State<AppState>, Path(p): Path<String>) -> ApiResult {
    query(&app, &p, Query::ListCrs).await
}

async fn get_cr(State(app): State<AppState>, Path((p, id)): Path<(String, String)>) -> ApiResult {
    query(&app, &p, Query::Cr(id)).await
}

#[derive(Deserialize)]
struct TransitionReq {
    target: String,
}

async fn transition_cr(
    State(app): State<AppState>,
    Path((p, id)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult {
    let req: TransitionReq = parse_body(&body)?;
    let c = Command::TransitionCr {
        cr_id: id,
        target: parse_state(&req.target)?,
    };
    command(app, p, c).await
}

#[derive(Deserialize)]
struct ResolveReq {
    resolution: String,
    #[serde(default)]
    note: String,
}

async fn resolve_item(
    State(app): State<AppState>,
    Path((p, id, node)): Path<(String, String, String)>,
    body: Bytes,
) -> ApiResult {
    let req: ResolveReq = parse_body(&body)?;
    let c = Command::ResolveItem {
        cr_id: id,
        node: parse_id(&node)?,
        resolution: parse_resolution(&req.resolution)?,
        note: req.note,
    };
    command(app, p, c).await
}

#[derive(Deserialize)]
struct BaselineReq {
    name: String,
}

async fn create_baseline(State(app): State<AppState>, Path(p): Path<String>, body: Bytes) -> ApiResult {
    let req: BaselineReq = parse_body(&body)?;
    command(app, p, Command::CreateBaseline { name: req.name }).await
}

async fn list_baselines(State(app): State<AppState>, Path(p): Path<String>) -> ApiResult {
    query(&app, &p, Query::ListBaselines).await
}

async fn baseline_index(State(app): State<AppState>, Path((p, id)): Path<(String, String)>) -> ApiResult {
    query(&app, &p, Query::BaselineIndex(id)).await
}

async fn baseline_diff(State(app): State<AppState>, Path(p): Path<String>, params: Params) -> ApiResult {
    let q = Query::BaselineDiff {
        a: required(&params, "a")?.to_string(),
        b: required(&params, "b")?.to_string(),
    };
    query(&app, &p, q).await
}

async fn coverage(State(app): State<AppState>, Path(p): Path<String>, params: Params) -> ApiResult {
    let q = Query::Coverage {
        dal: parse_dal(required(&params, "dal")?)?,
        ruleset: default_ruleset(),
    };
    query(&app, &p, q).await
}

fn matrix_query(params: &BTreeMap<String, String>, csv: bool) -> Result<Query, ProjectError> {
    Ok(Query::Matrix {
        rows: parse_kind(required(params, "rows")?)?,
        cols: parse_kind(required(params, "cols")?)?,
        types: parse_types(required(params, "types")?)?,
        csv,
    })
}

async fn matrix(State(app): State<AppState>, Path(p): Path<String>, params: Params) -> ApiResult {
    let csv = opt_param(&params, "format") == Some("csv");
    query(&app, &p, matrix_query(&params, csv)?).await
}

async fn matrix_csv(State(app): State<AppState>, Path(p): Path<String>, params: Params) -> ApiResult {
    query(&app, &p, matrix_query(&params, true)?).await
}

async fn export_graph(State(app): State<AppState>, Path(p): Path<String>, params: Params) -> ApiResult {
    let q = Query::ExportGraph {
        format: GraphFormat::parse(opt_param(&params, "format").unwrap_or("json"))?,
        kinds: opt_param(&params, "kinds").map(parse_kinds).transpose()?,
        types: opt_param(&params, "types").map(parse_types).transpose()?,
    };
    query(&app, &p, q).await
}

async fn events(State(app): State<AppState>, Path(p): Path<String>, params: Params) -> ApiResult {
    let since = match opt_param(&params, "since") {
        None => 0,
        Some(s) => s
            .parse::<u64>()
            .map_err(|_| ProjectError::Validation(format!("since must be a non-negative integer, got {s:?}")))?,
    };
    let handle = app.handle(&p)?;
    let p = handle.writer.lock().expect("writer lock");
    Ok(respond(StatusCode::OK, events_body(p.events_since(since))))
}

async fn not_found() -> Response {
    ApiError(ProjectError::NotFound("no such route".into())).into_response()
}

/// The `/api/v1` router over projects in `store`.
pub fn router(store: Store) -> Router {
    let app = Arc::new(App {
        store,
        open: Mutex::new(BTreeMap::new()),
    });
    let p = "/api/v1/projects/{p}";
    Router::new()
        .route("/api/v1/projects", post(create_project).get(list_projects))
        .route(&format!("{p}/ingest"), post(ingest))
        .route(&format!("{p}/nodes"), get(list_nodes))
        .route(&format!("{p}/nodes/{{id}}"), get(get_node))
        .route(&format!("{p}/nodes/{{id}}/neighbors"), get(neighbors))
        .route(&format!("{p}/links"), post(add_link).delete(remove_link))
        .route(&format!("{p}/impact"), post(impact))
        .route(&format!("{p}/crs"), post(create_cr).get(list_crs))
        .route(&format!("{p}/crs/{{id}}"), get(get_cr))
        .route(&format!("{p}/crs/{{id}}/transition"), post(transition_cr))
        .route(&format!("{p}/crs/{{id}}/items/{{node}}/resolve"), post(resolve_item))
        .route(&format!("{p}/baselines"), post(create_baseline).get(list_baselines))
        .route(&format!("{p}/baselines/diff"), get(baseline_diff))
        .route(&format!("{p}/baselines/{{id}}/index"), get(baseline_index))
        .route(&format!("{p}/coverage"), get(coverage))
        .route(&format!("{p}/matrix"), get(matrix))
        .route(&format!("{p}/matrix.csv"), get(matrix_csv))
        .route(&format!("{p}/export/graph"), get(export_graph))
        .route(&format!("{p}/events"), get(events))
        .fallback(not_found)
        .with_state(app)
}

/// Serves the API until the process is stopped.
pub async fn serve(store: Store, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}
