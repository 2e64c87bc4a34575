//! Command-line front end.
//!
//! Exit codes: 0 success, 1 findings (gaps, or a non-empty diff with
//! `--fail-on-diff`), 2 usage error or rejected request, 3 unparseable input,
//! 4 storage or event-chain failure. Machine output goes to stdout, messages
//! to stderr. With `--json`, stdout carries exactly the body the HTTP API
//! returns for the same request.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::api::{
    error_body, events_body, impact_config, parse_dal, parse_format, parse_id, parse_kind,
    parse_kinds, parse_resolution, parse_state, parse_types, run_command, run_query, Body, Command,
    GraphFormat, Query,
};
use crate::baseline::BaselineDiff;
use crate::change::{ChangeRequest, ImpactSet};
use crate::compliance::{default_ruleset, load_ruleset, GapReport};
use crate::graph::LinkKey;
use crate::model::{ArtifactId, LinkType};
use crate::project::{ProjectError, Store};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FINDINGS: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "traceforge", version, about = "Traceability and compliance engine")]
pub struct Cli {
    /// Store directory (overrides TRACEFORGE_HOME).
    #[arg(long, global = true)]
    pub home: Option<PathBuf>,
    /// Project name.
    #[arg(long, short, global = true, default_value = "default")]
    pub project: String,
    /// Print the JSON body the HTTP API would return.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Create the project.
    Init,
    /// Ingest an export file.
    Ingest {
        /// csv | reqif | issues | vcslog
        #[arg(long)]
        format: String,
        file: PathBuf,
    },
    /// Check trace coverage at a DAL; exits 1 when gaps are found.
    Check {
        #[arg(long)]
        dal: String,
        /// Rule file replacing the default ruleset.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Preview the impact of changing the seed artifacts.
    Impact(ImpactArgs),
    /// Change requests.
    #[command(subcommand)]
    Cr(CrCmd),
    /// Baselines and configuration indices.
    #[command(subcommand)]
    Baseline(BaselineCmd),
    /// Reports.
    #[command(subcommand)]
    Report(ReportCmd),
    /// Export the graph.
    Export {
        /// dot | json
        #[arg(long, default_value = "json")]
        format: String,
        /// Kinds to include (DOT only).
        #[arg(long)]
        kinds: Option<String>,
        /// Link types to include (DOT only).
        #[arg(long)]
        types: Option<String>,
    },
    /// Add or remove a trace link.
    #[command(subcommand)]
    Link(LinkCmd),
    /// List artifacts.
    Nodes {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        q: Option<String>,
    },
    /// Show one artifact and its links.
    Node { id: String },
    /// Events after a sequence number.
    Events {
        #[arg(long, default_value_t = 0)]
        since: u64,
    },
    /// Verify the event chain and baseline files.
    VerifyLog,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
    },
}

#[derive(Debug, Args)]
pub struct ImpactArgs {
    #[arg(long = "seed", required = true, num_args = 1..)]
    pub seeds: Vec<String>,
    /// Link types to follow (default: all).
    #[arg(long, num_args = 1..)]
    pub types: Vec<String>,
    #[arg(long)]
    pub depth: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum CrCmd {
    Create {
        #[arg(long)]
        title: String,
        #[arg(long, default_value = "")]
        description: String,
        #[command(flatten)]
        impact: ImpactArgs,
    },
    List,
    Show {
        id: String,
    },
    Transition {
        id: String,
        target: String,
    },
    Resolve {
        id: String,
        node: String,
        /// resolved | waived
        #[arg(long, default_value = "resolved")]
        resolution: String,
        #[arg(long, default_value = "")]
        note: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum BaselineCmd {
    Create {
        name: String,
    },
    List,
    /// Print the stored configuration index.
    Show {
        id: String,
    },
    Diff {
        a: String,
        b: String,
        #[arg(long)]
        fail_on_diff: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReportCmd {
    /// Trace matrix; CSV unless --json.
    Matrix {
        #[arg(long)]
        rows: String,
        #[arg(long)]
        cols: String,
        #[arg(long, num_args = 1..)]
        types: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LinkCmd {
    Add { from: String, link_type: String, to: String },
    Remove { from: String, link_type: String, to: String },
}

fn types_arg(list: &[String]) -> Result<Option<BTreeSet<LinkType>>, ProjectError> {
    if list.is_empty() {
        return Ok(None);
    }
    let mut out = BTreeSet::new();
    for t in list {
        out.extend(parse_types(t)?);
    }
    Ok(Some(out))
}

fn impact_parts(a: &ImpactArgs) -> Result<(BTreeSet<ArtifactId>, crate::change::ImpactConfig), ProjectError> {
    let seeds = a.seeds.iter().map(|s| parse_id(s)).collect::<Result<_, _>>()?;
    Ok((seeds, impact_config(types_arg(&a.types)?, a.depth)))
}

fn link_key(from: &str, ty: &str, to: &str) -> Result<LinkKey, ProjectError> {
    Ok(LinkKey::new(
        parse_id(from)?,
        LinkType::parse(ty).map_err(|e| ProjectError::Validation(e.to_string()))?,
        parse_id(to)?,
    ))
}

/// What a command printed and how it ended.
struct Outcome {
    body: Body,
    text: Option<String>,
    code: u8,
}

impl Outcome {
    fn body(body: Body) -> Self {
        Outcome { body, text: None, code: EXIT_OK }
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &Body) -> T {
    serde_json::from_str(&body.text).expect("own output")
}

fn render_impact(set: &ImpactSet) -> String {
    let mut s = format!("{} impacted artifact(s) at graph revision {}\n", set.items.len(), set.computed_at);
    for i in &set.items {
        let path: Vec<String> = i.path.iter().map(|p| format!("-{}-> {}", p.link_type, p.node)).collect();
        s.push_str(&format!("  {}\t{}\t{:?}\t{}\n", i.distance, i.node, i.status, path.join(" ")));
    }
    s
}

fn render_cr(cr: &ChangeRequest) -> String {
    let mut s = format!(
        "{} [{}] {}\n  created {}  updated {}\n",
        cr.cr_id, cr.state, cr.title, cr.created, cr.updated
    );
    if !cr.description.is_empty() {
        s.push_str(&format!("  {}\n", cr.description));
    }
    if let Some(impact) = &cr.impact {
        s.push_str(&render_impact(impact));
    }
    s
}

fn execute(cli: &Cli, store: &Store, stderr: &mut dyn Write) -> Result<Outcome, ProjectError> {
    if let Cmd::Init = cli.command {
        store.create_project(&cli.project)?;
        return Ok(Outcome::body(Body::json(&serde_json::json!({ "name": cli.project }))));
    }
    if let Cmd::VerifyLog = cli.command {
        let report = store.verify_project(&cli.project)?;
        let mut text = format!(
            "{}: {} event(s), graph revision {}, head {}\n",
            report.project, report.events, report.graph_revision, report.head
        );
        for b in &report.baseline_files {
            text.push_str(&format!("  {} {}\n", b.baseline_id, if b.ok { "ok" } else { "MISMATCH" }));
        }
        if !report.is_ok() {
            return Err(ProjectError::Storage(format!("baseline files do not match the log\n{text}")));
        }
        return Ok(Outcome {
            body: Body::json(&report),
            text: Some(text),
            code: EXIT_OK,
        });
    }
    let mut project = store.open_project(&cli.project)?;
    for w in project.warnings() {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let state = project.state();
    let q = |query: Query| run_query(state, &query);
    Ok(match &cli.command {
        Cmd::Init | Cmd::VerifyLog | Cmd::Serve { .. } => unreachable!("handled by caller"),
        Cmd::Ingest { format, file } => {
            let format = parse_format(format)?;
            let content = std::fs::read(file)
                .map_err(|e| ProjectError::Validation(format!("{}: {e}", file.display())))?;
            Outcome::body(run_command(&mut project, Command::Ingest { format, content })?)
        }
        Cmd::Check { dal, rules } => {
            let ruleset = match rules {
                None => default_ruleset(),
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| ProjectError::Validation(format!("{}: {e}", path.display())))?;
                    load_ruleset(&text)?
                }
            };
            let body = q(Query::Coverage { dal: parse_dal(dal)?, ruleset })?;
            let report: GapReport = parse_json(&body);
            Outcome {
                text: Some(report.render_text()),
                code: if report.is_compliant() { EXIT_OK } else { EXIT_FINDINGS },
                body,
            }
        }
        Cmd::Impact(a) => {
            let (seeds, config) = impact_parts(a)?;
            let body = q(Query::Impact { seeds, config })?;
            let set: ImpactSet = parse_json(&body);
            Outcome { text: Some(render_impact(&set)), body, code: EXIT_OK }
        }
        Cmd::Cr(c) => match c {
            CrCmd::Create { title, description, impact } => {
                let (seeds, config) = impact_parts(impact)?;
                let body = run_command(
                    &mut project,
                    Command::CreateCr {
                        title: title.clone(),
                        description: description.clone(),
                        seeds,
                        config,
                    },
                )?;
                let cr: ChangeRequest = parse_json(&body);
                Outcome { text: Some(render_cr(&cr)), body, code: EXIT_OK }
            }
            CrCmd::List => {
                let body = q(Query::ListCrs)?;
                let crs: Vec<ChangeRequest> = parse_json(&body);
                let text = crs
                    .iter()
                    .map(|c| format!("{}\t{}\t{} item(s) open\t{}\n", c.cr_id, c.state, c.unresolved_count(), c.title))
                    .collect();
                Outcome { text: Some(text), body, code: EXIT_OK }
            }
            CrCmd::Show { id } => {
                let body = q(Query::Cr(id.clone()))?;
                let cr: ChangeRequest = parse_json(&body);
                Outcome { text: Some(render_cr(&cr)), body, code: EXIT_OK }
            }
            CrCmd::Transition { id, target } => Outcome::body(run_command(
                &mut project,
                Command::TransitionCr {
                    cr_id: id.clone(),
                    target: parse_state(target)?,
                },
            )?),
            CrCmd::Resolve { id, node, resolution, note } => Outcome::body(run_command(
                &mut project,
                Command::ResolveItem {
                    cr_id: id.clone(),
                    node: parse_id(node)?,
                    resolution: parse_resolution(resolution)?,
                    note: note.clone(),
                },
            )?),
        },
        Cmd::Baseline(b) => match b {
            BaselineCmd::Create { name } => {
                Outcome::body(run_command(&mut project, Command::CreateBaseline { name: name.clone() })?)
            }
            BaselineCmd::List => {
                let body = q(Query::ListBaselines)?;
                let list: Vec<serde_json::Value> = parse_json(&body);
                let text = list
                    .iter()
                    .map(|b| {
                        format!(
                            "{}\t{}\trev {}\t{}\t{}\n",
                            b["baseline_id"].as_str().unwrap_or_default(),
                            b["created"].as_str().unwrap_or_default(),
                            b["graph_revision"],
                            b["index_hash"].as_str().unwrap_or_default(),
                            b["name"].as_str().unwrap_or_default(),
                        )
                    })
                    .collect();
                Outcome { text: Some(text), body, code: EXIT_OK }
            }
            BaselineCmd::Show { id } => Outcome::body(q(Query::BaselineIndex(id.clone()))?),
            BaselineCmd::Diff { a, b, fail_on_diff } => {
                let body = q(Query::BaselineDiff { a: a.clone(), b: b.clone() })?;
                let diff: BaselineDiff = parse_json(&body);
                Outcome {
                    text: Some(diff.render_text()),
                    code: if *fail_on_diff && !diff.is_empty() { EXIT_FINDINGS } else { EXIT_OK },
                    body,
                }
            }
        },
        Cmd::Report(ReportCmd::Matrix { rows, cols, types }) => {
            let types = types_arg(types)?.unwrap_or_default();
            Outcome::body(q(Query::Matrix {
                rows: parse_kind(rows)?,
                cols: parse_kind(cols)?,
                types,
                csv: !cli.json,
            })?)
        }
        Cmd::Export { format, kinds, types } => Outcome::body(q(Query::ExportGraph {
            format: GraphFormat::parse(format)?,
            kinds: kinds.as_deref().map(parse_kinds).transpose()?,
            types: types.as_deref().map(parse_types).transpose()?,
        })?),
        Cmd::Link(l) => match l {
            LinkCmd::Add { from, link_type, to } => {
                Outcome::body(run_command(&mut project, Command::AddLink(link_key(from, link_type, to)?))?)
            }
            LinkCmd::Remove { from, link_type, to } => {
                Outcome::body(run_command(&mut project, Command::RemoveLink(link_key(from, link_type, to)?))?)
            }
        },
        Cmd::Nodes { kind, q: needle } => Outcome::body(q(Query::ListNodes {
            kind: kind.as_deref().map(parse_kind).transpose()?,
            q: needle.clone(),
        })?),
        Cmd::Node { id } => Outcome::body(q(Query::Node(parse_id(id)?))?),
        Cmd::Events { since } => Outcome::body(events_body(project.events_since(*since))),
    })
}

/// Runs one invocation, writing to the given streams. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let store = match &cli.home {
        Some(h) => Store::new(h),
        None => Store::from_env(),
    };
    if let Cmd::Serve { port, bind } = cli.command {
        let rt = match tokio::runtime::Runtime::new() {
            Ok(rt) => rt,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                return 4;
            }
        };
        return match rt.block_on(crate::service::serve(store, SocketAddr::new(bind, port))) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                4
            }
        };
    }
    match execute(&cli, &store, stderr) {
        Ok(out) => {
            let text = match (&out.text, cli.json) {
                (Some(t), false) => t.as_str(),
                _ => out.body.text.as_str(),
            };
            let _ = stdout.write_all(text.as_bytes());
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if let ProjectError::Ingest(report) = &e {
                for d in &report.diagnostics {
                    let _ = writeln!(stderr, "  {:?} {} {}: {}", d.severity, d.location, d.code, d.message);
                }
            }
            if cli.json {
                let _ = stdout.write_all(error_body(&e).text.as_bytes());
            }
            e.exit_code()
        }
    }
}

/// Entry point for the binary.
pub fn main() -> std::process::ExitCode {
    let code = run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::ExitCode::from(code)
}
