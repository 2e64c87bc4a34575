//! Turning tool exports into graph mutations.
//!
//! Each parser is a pure function from text to records plus diagnostics; no
//! input makes a parser panic. [`merge_into_graph`] then applies a batch of
//! records in a normalized order so the resulting graph does not depend on
//! the order records arrived in.

mod csv_export;
mod issues;
mod merge;
mod reqif;
mod vcs;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::model::{ArtifactId, ArtifactKind, LinkType};

pub use csv_export::{parse_requirements_csv, REQUIREMENTS_HEADER};
pub use issues::parse_issue_export;
pub use merge::merge_into_graph;
pub use reqif::parse_reqif_subset;
pub use vcs::{parse_trailers, parse_vcs_log, TrailerKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

/// Where a diagnostic points in its input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// Whole document (e.g. missing header, top-level type mismatch).
    Document,
    /// 1-based line number in the input text.
    Line(u64),
    /// CSV record, numbered by the line it starts on.
    Row(u64),
    /// 0-based index into a JSON array.
    Index(usize),
    /// 0-based SPEC-OBJECT index in a ReqIF document, with its line.
    SpecObject { index: usize, line: u32 },
    /// A record already parsed, named by its artifact id.
    Record(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Document => f.write_str("document"),
            Location::Line(n) => write!(f, "line {n}"),
            Location::Row(n) => write!(f, "row {n}"),
            Location::Index(n) => write!(f, "index {n}"),
            Location::SpecObject { index, line } => {
                write!(f, "spec-object {index} (line {line})")
            }
            Location::Record(id) => write!(f, "record {id}"),
        }
    }
}

impl Serialize for Location {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub location: Location,
    pub code: &'static str,
    pub message: String,
}

impl Diagnostic {
    pub fn error(location: Location, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            location,
            code,
            message: message.into(),
        }
    }

    pub fn warning(location: Location, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            location,
            code,
            message: message.into(),
        }
    }

    pub fn info(location: Location, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Info,
            location,
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}: {}", self.location, self.code, self.message)
    }
}

/// Records parsed from one input, with everything the parser had to say.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub diagnostics: Vec<Diagnostic>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
            diagnostics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RequirementRecord {
    pub id: ArtifactId,
    pub kind: ArtifactKind,
    pub title: String,
    pub body: String,
    pub parent_id: Option<ArtifactId>,
    pub derived: bool,
    pub attributes: BTreeMap<String, String>,
}

/// Kinds a requirements export may carry.
pub const REQUIREMENT_STORE_KINDS: [ArtifactKind; 8] = [
    ArtifactKind::SystemRequirement,
    ArtifactKind::HighLevelRequirement,
    ArtifactKind::LowLevelRequirement,
    ArtifactKind::DesignElement,
    ArtifactKind::SourceUnit,
    ArtifactKind::TestCase,
    ArtifactKind::TestResult,
    ArtifactKind::Document,
];

pub(crate) fn requirement_kind(code: &str) -> Option<ArtifactKind> {
    ArtifactKind::from_code(code).filter(|k| REQUIREMENT_STORE_KINDS.contains(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueType {
    Defect,
    Task,
    Story,
}

impl IssueType {
    pub fn name(self) -> &'static str {
        match self {
            IssueType::Defect => "defect",
            IssueType::Task => "task",
            IssueType::Story => "story",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "defect" => Some(IssueType::Defect),
            "task" => Some(IssueType::Task),
            "story" => Some(IssueType::Story),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct IssueRecord {
    pub key: ArtifactId,
    pub issue_type: IssueType,
    pub summary: String,
    pub status: String,
    pub links: Vec<(LinkType, ArtifactId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CommitRecord {
    pub hash: String,
    pub author: String,
    pub date: chrono::DateTime<chrono::Utc>,
    pub files: Vec<String>,
    pub message: String,
}

impl CommitRecord {
    pub fn node_id(&self) -> Result<ArtifactId, crate::model::IdError> {
        ArtifactId::new(&format!("CMT-{}", self.hash))
    }
}

/// Everything one merge applies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestBatch {
    pub requirements: Vec<RequirementRecord>,
    pub issues: Vec<IssueRecord>,
    pub commits: Vec<CommitRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub created: usize,
    pub updated: usize,
    pub unchanged: usize,
    pub links_created: usize,
    pub links_skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub counts: IngestCounts,
    pub diagnostics: Vec<Diagnostic>,
}

impl IngestReport {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }
}

/// The export formats the ingest entry points understand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestFormat {
    Csv,
    Reqif,
    Issues,
    Vcslog,
}

impl IngestFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(IngestFormat::Csv),
            "reqif" => Some(IngestFormat::Reqif),
            "issues" => Some(IngestFormat::Issues),
            "vcslog" => Some(IngestFormat::Vcslog),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IngestFormat::Csv => "csv",
            IngestFormat::Reqif => "reqif",
            IngestFormat::Issues => "issues",
            IngestFormat::Vcslog => "vcslog",
        }
    }
}

/// Parses `text` in the given format into a batch.
pub fn parse_export(format: IngestFormat, text: &str) -> (IngestBatch, Vec<Diagnostic>) {
    let mut batch = IngestBatch::default();
    let diagnostics = match format {
        IngestFormat::Csv => {
            let p = parse_requirements_csv(text);
            batch.requirements = p.records;
            p.diagnostics
        }
        IngestFormat::Reqif => {
            let p = parse_reqif_subset(text);
            batch.requirements = p.records;
            p.diagnostics
        }
        IngestFormat::Issues => {
            let p = parse_issue_export(text);
            batch.issues = p.records;
            p.diagnostics
        }
        IngestFormat::Vcslog => {
            let p = parse_vcs_log(text);
            batch.commits = p.records;
            p.diagnostics
        }
    };
    (batch, diagnostics)
}

/// Decodes raw file bytes, reporting the first invalid byte offset.
pub fn decode_utf8(bytes: &[u8]) -> Result<&str, Diagnostic> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() as u64 + 1;
        Diagnostic::error(
            Location::Line(line),
            "BadUtf8",
            format!("invalid UTF-8 at byte {}", e.valid_up_to()),
        )
    })
}

/// Parses `key=value;key=value`. Empty input yields an empty map.
pub(crate) fn parse_attribute_cell(cell: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    if cell.trim().is_empty() {
        return Ok(out);
    }
    for pair in cell.split(';') {
        if pair.trim().is_empty() {
            continue;
        }
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| format!("attribute {pair:?} is not key=value"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(format!("attribute {pair:?} has an empty key"));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub(crate) fn parse_derived(cell: &str) -> Option<bool> {
    match cell.trim() {
        "" | "false" => Some(false),
        "true" => Some(true),
        _ => None,
    }
}
