//! Core vocabulary of the trace graph: artifact identifiers, kinds, link
//! types and the endpoint matrix that constrains which links are legal.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid artifact id {input:?}: {reason}")]
pub struct IdError {
    pub input: String,
    pub reason: &'static str,
}

/// Identifier of an artifact, rendered either as a bare token (`HLR-1`) or as
/// `NAMESPACE:LOCAL` (`SRC:src/a.c`). Ordering and equality are bytewise on
/// the rendered form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArtifactId(String);

impl ArtifactId {
    pub fn new(rendered: &str) -> Result<Self, IdError> {
        let err = |reason| IdError {
            input: rendered.to_string(),
            reason,
        };
        if rendered.is_empty() {
            return Err(err("empty"));
        }
        if rendered.chars().any(char::is_whitespace) {
            return Err(err("contains whitespace"));
        }
        if rendered.chars().any(char::is_control) {
            return Err(err("contains control characters"));
        }
        if let Some((ns, local)) = rendered.split_once(':') {
            if ns.is_empty()
                || !ns
                    .bytes()
                    .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_')
            {
                return Err(err("namespace must be an uppercase token"));
            }
            if local.is_empty() {
                return Err(err("empty local part"));
            }
        }
        Ok(Self(rendered.to_string()))
    }

    pub fn namespaced(namespace: &str, local: &str) -> Result<Self, IdError> {
        if namespace.is_empty() {
            Self::new(local)
        } else {
            Self::new(&format!("{namespace}:{local}"))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn namespace(&self) -> &str {
        self.0.split_once(':').map(|(ns, _)| ns).unwrap_or("")
    }

    pub fn local(&self) -> &str {
        self.0.split_once(':').map(|(_, l)| l).unwrap_or(&self.0)
    }
}

impl fmt::Display for ArtifactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ArtifactId {
    type Err = IdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl Serialize for ArtifactId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ArtifactId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ArtifactId::new(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {what} {input:?}")]
pub struct UnknownName {
    pub what: &'static str,
    pub input: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArtifactKind {
    SystemRequirement,
    HighLevelRequirement,
    LowLevelRequirement,
    DesignElement,
    SourceUnit,
    TestCase,
    TestResult,
    Issue,
    Commit,
    Document,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 10] = [
        ArtifactKind::SystemRequirement,
        ArtifactKind::HighLevelRequirement,
        ArtifactKind::LowLevelRequirement,
        ArtifactKind::DesignElement,
        ArtifactKind::SourceUnit,
        ArtifactKind::TestCase,
        ArtifactKind::TestResult,
        ArtifactKind::Issue,
        ArtifactKind::Commit,
        ArtifactKind::Document,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArtifactKind::SystemRequirement => "SystemRequirement",
            ArtifactKind::HighLevelRequirement => "HighLevelRequirement",
            ArtifactKind::LowLevelRequirement => "LowLevelRequirement",
            ArtifactKind::DesignElement => "DesignElement",
            ArtifactKind::SourceUnit => "SourceUnit",
            ArtifactKind::TestCase => "TestCase",
            ArtifactKind::TestResult => "TestResult",
            ArtifactKind::Issue => "Issue",
            ArtifactKind::Commit => "Commit",
            ArtifactKind::Document => "Document",
        }
    }

    /// Short code used in CSV exports, rule files and CLI flags.
    pub fn code(self) -> &'static str {
        match self {
            ArtifactKind::SystemRequirement => "SYS",
            ArtifactKind::HighLevelRequirement => "HLR",
            ArtifactKind::LowLevelRequirement => "LLR",
            ArtifactKind::DesignElement => "DES",
            ArtifactKind::SourceUnit => "SRC",
            ArtifactKind::TestCase => "TC",
            ArtifactKind::TestResult => "TR",
            ArtifactKind::Issue => "ISS",
            ArtifactKind::Commit => "CMT",
            ArtifactKind::Document => "DOC",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Accepts either the short code or the full name.
    pub fn parse_loose(s: &str) -> Result<Self, UnknownName> {
        Self::from_code(s)
            .or_else(|| Self::from_name(s))
            .ok_or_else(|| UnknownName {
                what: "artifact kind",
                input: s.to_string(),
            })
    }

    pub fn is_requirement(self) -> bool {
        matches!(
            self,
            ArtifactKind::SystemRequirement
                | ArtifactKind::HighLevelRequirement
                | ArtifactKind::LowLevelRequirement
        )
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The nine trace relations. Ordering follows the rendered name so that
/// `(from, type, to)` tuples sort bytewise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LinkType {
    Satisfies,
    Refines,
    Implements,
    Verifies,
    Records,
    Tracks,
    Resolves,
    Modifies,
    Contributes,
}

impl Ord for LinkType {
    fn cmp(&self, other: &Self) -> Ordering {
        self.name().cmp(other.name())
    }
}

impl PartialOrd for LinkType {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl LinkType {
    pub const ALL: [LinkType; 9] = [
        LinkType::Satisfies,
        LinkType::Refines,
        LinkType::Implements,
        LinkType::Verifies,
        LinkType::Records,
        LinkType::Tracks,
        LinkType::Resolves,
        LinkType::Modifies,
        LinkType::Contributes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LinkType::Satisfies => "SATISFIES",
            LinkType::Refines => "REFINES",
            LinkType::Implements => "IMPLEMENTS",
            LinkType::Verifies => "VERIFIES",
            LinkType::Records => "RECORDS",
            LinkType::Tracks => "TRACKS",
            LinkType::Resolves => "RESOLVES",
            LinkType::Modifies => "MODIFIES",
            LinkType::Contributes => "CONTRIBUTES",
        }
    }

    pub fn initial(self) -> char {
        self.name().as_bytes()[0] as char
    }

    pub fn parse(s: &str) -> Result<Self, UnknownName> {
        let upper = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|t| t.name() == upper)
            .ok_or_else(|| UnknownName {
                what: "link type",
                input: s.to_string(),
            })
    }

    pub fn allowed_sources(self) -> &'static [ArtifactKind] {
        use ArtifactKind::*;
        match self {
            LinkType::Satisfies => &[HighLevelRequirement],
            LinkType::Refines => &[LowLevelRequirement],
            LinkType::Implements => &[SourceUnit],
            LinkType::Verifies => &[TestCase],
            LinkType::Records => &[TestResult],
            LinkType::Tracks => &[Issue],
            LinkType::Resolves | LinkType::Modifies | LinkType::Contributes => &[Commit],
        }
    }

    pub fn allowed_targets(self) -> &'static [ArtifactKind] {
        use ArtifactKind::*;
        match self {
            LinkType::Satisfies => &[SystemRequirement],
            LinkType::Refines => &[HighLevelRequirement],
            LinkType::Implements => &[LowLevelRequirement],
            LinkType::Verifies => &[HighLevelRequirement, LowLevelRequirement],
            LinkType::Records => &[TestCase],
            LinkType::Tracks => &[SystemRequirement, HighLevelRequirement, LowLevelRequirement],
            LinkType::Resolves => &[Issue],
            LinkType::Modifies => &[SourceUnit],
            LinkType::Contributes => &[HighLevelRequirement, LowLevelRequirement],
        }
    }

    /// Whether `(from, self, to)` is in the endpoint matrix.
    pub fn permits(self, from: ArtifactKind, to: ArtifactKind) -> bool {
        self.allowed_sources().contains(&from) && self.allowed_targets().contains(&to)
    }

    /// The unique link type permitted from `from` to `to`, if any. No two
    /// types share an endpoint pair, so this is well-defined.
    pub fn between(from: ArtifactKind, to: ArtifactKind) -> Option<LinkType> {
        Self::ALL.into_iter().find(|t| t.permits(from, to))
    }
}

impl fmt::Display for LinkType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    ReqStore,
    IssueTracker,
    Vcs,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Status {
    Active,
    Deleted,
}
