//! DAL-parameterized coverage rules, the gap checker, and trace matrices.
//!
//! The built-in rule set is a set of defaults modelled on common trace
//! objectives, not certification guidance; projects replace it wholesale
//! with [`load_ruleset`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::TraceGraph;
use crate::model::{ArtifactId, ArtifactKind, LinkType};

/// Development assurance level. `A` is the most stringent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DalLevel {
    A,
    B,
    C,
    D,
    E,
}

impl DalLevel {
    pub const ALL: [DalLevel; 5] = [DalLevel::A, DalLevel::B, DalLevel::C, DalLevel::D, DalLevel::E];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Some(DalLevel::A),
            "B" => Some(DalLevel::B),
            "C" => Some(DalLevel::C),
            "D" => Some(DalLevel::D),
            "E" => Some(DalLevel::E),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            DalLevel::A => 'A',
            DalLevel::B => 'B',
            DalLevel::C => 'C',
            DalLevel::D => 'D',
            DalLevel::E => 'E',
        }
    }
}

impl fmt::Display for DalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkDirection {
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageRule {
    pub rule_id: String,
    pub subject_kind: ArtifactKind,
    pub direction: LinkDirection,
    pub link_type: LinkType,
    pub min: usize,
    pub exempt_derived: bool,
    pub applies_to: BTreeSet<DalLevel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageRuleSet {
    pub name: String,
    pub rules: Vec<CoverageRule>,
    pub check_suspect_links: BTreeSet<DalLevel>,
}

impl CoverageRuleSet {
    pub fn rules_at(&self, dal: DalLevel) -> impl Iterator<Item = &CoverageRule> {
        self.rules.iter().filter(move |r| r.applies_to.contains(&dal))
    }

    pub fn checks_suspects_at(&self, dal: DalLevel) -> bool {
        self.check_suspect_links.contains(&dal)
    }
}

fn dals(letters: &str) -> BTreeSet<DalLevel> {
    letters.chars().filter_map(|c| DalLevel::parse(&c.to_string())).collect()
}

pub fn default_ruleset() -> CoverageRuleSet {
    use ArtifactKind::*;
    use LinkDirection::*;
    let rule = |id: &str, kind, dir, t, exempt, letters: &str| CoverageRule {
        rule_id: id.to_string(),
        subject_kind: kind,
        direction: dir,
        link_type: t,
        min: 1,
        exempt_derived: exempt,
        applies_to: dals(letters),
    };
    CoverageRuleSet {
        name: "default".into(),
        rules: vec![
            rule("R1", HighLevelRequirement, Out, LinkType::Satisfies, true, "ABCD"),
            rule("R2", LowLevelRequirement, Out, LinkType::Refines, true, "ABC"),
            rule("R3", LowLevelRequirement, In, LinkType::Implements, false, "ABC"),
            rule("R4", HighLevelRequirement, In, LinkType::Verifies, false, "ABCD"),
            rule("R5", LowLevelRequirement, In, LinkType::Verifies, false, "AB"),
            rule("R6", TestCase, In, LinkType::Records, false, "ABCD"),
            rule("R7", SourceUnit, Out, LinkType::Implements, false, "ABC"),
        ],
        check_suspect_links: dals("ABCD"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("line {line}: syntax error: {reason}")]
    SyntaxError { line: usize, reason: String },
    #[error("line {line}: unknown artifact kind {kind:?}")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: unknown link type {link_type:?}")]
    UnknownLinkType { line: usize, link_type: String },
    #[error("line {line}: bad DAL set {set:?}")]
    BadDalSet { line: usize, set: String },
}

impl RuleError {
    pub fn line(&self) -> usize {
        match self {
            RuleError::SyntaxError { line, .. }
            | RuleError::UnknownKind { line, .. }
            | RuleError::UnknownLinkType { line, .. }
            | RuleError::BadDalSet { line, .. } => *line,
        }
    }
}

fn parse_dal_set(token: &str, line: usize) -> Result<BTreeSet<DalLevel>, RuleError> {
    let bad = || RuleError::BadDalSet {
        line,
        set: token.to_string(),
    };
    let letters = token.strip_prefix("dal=").ok_or_else(bad)?;
    let mut set = BTreeSet::new();
    for c in letters.chars() {
        let d = DalLevel::parse(&c.to_string()).ok_or_else(bad)?;
        if !set.insert(d) {
            return Err(bad());
        }
    }
    if set.is_empty() {
        return Err(bad());
    }
    Ok(set)
}

/// Parses the rule file format:
///
/// ```text
/// name <text>
/// rule <id> <KindCode> <out|in> <LINK_TYPE> min=<n> [exempt-derived] dal=<letters>
/// suspect dal=<letters>
/// ```
///
/// Blank lines and lines starting with `#` are ignored. The result replaces
/// the defaults entirely; an empty file yields an empty set named `unnamed`.
pub fn load_ruleset(text: &str) -> Result<CoverageRuleSet, RuleError> {
    let mut set = CoverageRuleSet {
        name: "unnamed".into(),
        rules: Vec::new(),
        check_suspect_links: BTreeSet::new(),
    };
    let mut seen_ids = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let syntax = |reason: &str| RuleError::SyntaxError {
            line,
            reason: reason.to_string(),
        };
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "name" => {
                let name = content["name".len()..].trim();
                if name.is_empty() {
                    return Err(syntax("name needs a value"));
                }
                set.name = name.to_string();
            }
            "suspect" => {
                if tokens.len() != 2 {
                    return Err(syntax("expected `suspect dal=<letters>`"));
                }
                set.check_suspect_links = parse_dal_set(tokens[1], line)?;
            }
            "rule" => {
                let (exempt, dal_tok) = match tokens.len() {
                    7 => (false, tokens[6]),
                    8 if tokens[6] == "exempt-derived" => (true, tokens[7]),
                    8 => return Err(syntax("expected `exempt-derived` before dal=")),
                    _ => return Err(syntax("rule needs 6 or 7 fields after `rule`")),
                };
                let rule_id = tokens[1];
                if rule_id == "SUSPECT" {
                    return Err(syntax("rule id SUSPECT is reserved"));
                }
                let subject_kind = ArtifactKind::from_code(tokens[2]).ok_or_else(|| {
                    RuleError::UnknownKind {
                        line,
                        kind: tokens[2].to_string(),
                    }
                })?;
                let direction = match tokens[3] {
                    "out" => LinkDirection::Out,
                    "in" => LinkDirection::In,
                    _ => return Err(syntax("direction must be `out` or `in`")),
                };
                let link_type =
                    LinkType::parse(tokens[4]).map_err(|_| RuleError::UnknownLinkType {
                        line,
                        link_type: tokens[4].to_string(),
                    })?;
                let min = tokens[5]
                    .strip_prefix("min=")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| syntax("expected min=<n> with n >= 1"))?;
                let applies_to = parse_dal_set(dal_tok, line)?;
                if !seen_ids.insert(rule_id.to_string()) {
                    return Err(syntax(&format!("duplicate rule id {rule_id}")));
                }
                set.rules.push(CoverageRule {
                    rule_id: rule_id.to_string(),
                    subject_kind,
                    direction,
                    link_type,
                    min,
                    exempt_derived: exempt,
                    applies_to,
                });
            }
            other => return Err(syntax(&format!("unknown directive {other:?}"))),
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GapKind {
    MissingLink,
    SuspectLink,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Gap {
    pub node: ArtifactId,
    pub rule: String,
    pub kind: GapKind,
    pub detail: String,
}

pub const SUSPECT_RULE_ID: &str = "SUSPECT";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub dal: DalLevel,
    pub ruleset: String,
    pub graph_revision: u64,
    pub gaps: Vec<Gap>,
}

impl GapReport {
    pub fn is_compliant(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "coverage at DAL {} (ruleset {}, graph revision {}): {} gap(s)\n",
            self.dal,
            self.ruleset,
            self.graph_revision,
            self.gaps.len()
        );
        for g in &self.gaps {
            s.push_str(&format!("  {}\t{}\t{:?}\t{}\n", g.node, g.rule, g.kind, g.detail));
        }
        s
    }
}

/// Checks every active node against the rules applicable at `dal`, and
/// reports each suspect link (keyed on its source node) when suspect
/// checking applies.
pub fn check_coverage(graph: &TraceGraph, dal: DalLevel, ruleset: &CoverageRuleSet) -> GapReport {
    let mut gaps = Vec::new();
    let rules: Vec<&CoverageRule> = ruleset.rules_at(dal).collect();
    for node in graph.active_nodes() {
        for rule in rules.iter().filter(|r| r.subject_kind == node.kind) {
            if rule.exempt_derived && node.is_derived() {
                continue;
            }
            let count = match rule.direction {
                LinkDirection::Out => graph
                    .outgoing_keys(&node.id)
                    .filter(|k| k.link_type == rule.link_type)
                    .count(),
                LinkDirection::In => graph
                    .incoming_keys(&node.id)
                    .filter(|k| k.link_type == rule.link_type)
                    .count(),
            };
            if count < rule.min {
                let dir = match rule.direction {
                    LinkDirection::Out => "outgoing",
                    LinkDirection::In => "incoming",
                };
                gaps.push(Gap {
                    node: node.id.clone(),
                    rule: rule.rule_id.clone(),
                    kind: GapKind::MissingLink,
                    detail: format!(
                        "{count} {dir} {} link(s), need at least {}",
                        rule.link_type, rule.min
                    ),
                });
            }
        }
    }
    if ruleset.checks_suspects_at(dal) {
        for link in graph.links().filter(|l| l.suspect) {
            gaps.push(Gap {
                node: link.from.clone(),
                rule: SUSPECT_RULE_ID.into(),
                kind: GapKind::SuspectLink,
                detail: format!("suspect link {}", link.key()),
            });
        }
    }
    gaps.sort_by(|a, b| (&a.node, &a.rule, &a.detail).cmp(&(&b.node, &b.rule, &b.detail)));
    GapReport {
        dal,
        ruleset: ruleset.name.clone(),
        graph_revision: graph.graph_revision(),
        gaps,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("link types {types:?} cannot connect {row_kind} and {col_kind}")]
pub struct IncompatibleTypes {
    pub row_kind: ArtifactKind,
    pub col_kind: ArtifactKind,
    pub types: Vec<LinkType>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceMatrix {
    pub row_kind: ArtifactKind,
    pub col_kind: ArtifactKind,
    pub types: BTreeSet<LinkType>,
    pub rows: Vec<ArtifactId>,
    pub cols: Vec<ArtifactId>,
    /// Non-empty cells only, keyed by (row, col).
    #[serde(serialize_with = "serialize_cells")]
    pub cells: BTreeMap<(ArtifactId, ArtifactId), BTreeSet<LinkType>>,
}

#[derive(Serialize)]
struct CellRecord<'a> {
    row: &'a ArtifactId,
    col: &'a ArtifactId,
    types: &'a BTreeSet<LinkType>,
}

fn serialize_cells<S: serde::Serializer>(
    cells: &BTreeMap<(ArtifactId, ArtifactId), BTreeSet<LinkType>>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(cells.iter().map(|((row, col), types)| CellRecord { row, col, types }))
}

impl TraceMatrix {
    pub fn cell(&self, row: &ArtifactId, col: &ArtifactId) -> Option<&BTreeSet<LinkType>> {
        self.cells.get(&(row.clone(), col.clone()))
    }
}

/// Builds a row-kind by column-kind matrix over the given link types,
/// counting links in either direction.
pub fn build_trace_matrix(
    graph: &TraceGraph,
    row_kind: ArtifactKind,
    col_kind: ArtifactKind,
    types: &BTreeSet<LinkType>,
) -> Result<TraceMatrix, IncompatibleTypes> {
    let incompatible: Vec<LinkType> = types
        .iter()
        .copied()
        .filter(|t| !t.permits(row_kind, col_kind) && !t.permits(col_kind, row_kind))
        .collect();
    if types.is_empty() || !incompatible.is_empty() {
        return Err(IncompatibleTypes {
            row_kind,
            col_kind,
            types: if types.is_empty() { Vec::new() } else { incompatible },
        });
    }
    let ids_of = |kind| -> Vec<ArtifactId> {
        graph
            .active_nodes()
            .filter(|n| n.kind == kind)
            .map(|n| n.id.clone())
            .collect()
    };
    let rows = ids_of(row_kind);
    let cols = ids_of(col_kind);
    let row_set: BTreeSet<&ArtifactId> = rows.iter().collect();
    let col_set: BTreeSet<&ArtifactId> = cols.iter().collect();
    let mut cells: BTreeMap<(ArtifactId, ArtifactId), BTreeSet<LinkType>> = BTreeMap::new();
    for l in graph.links().filter(|l| types.contains(&l.link_type)) {
        for (r, c) in [(&l.from, &l.to), (&l.to, &l.from)] {
            if row_set.contains(r) && col_set.contains(c) {
                cells
                    .entry((r.clone(), c.clone()))
                    .or_default()
                    .insert(l.link_type);
                // a same-kind matrix must not count one link twice
                break;
            }
        }
    }
    Ok(TraceMatrix {
        row_kind,
        col_kind,
        types: types.clone(),
        rows,
        cols,
        cells,
    })
}

/// RFC 4180 rendering with a `row\col` corner cell and `+`-joined type
/// initials in each cell.
pub fn export_matrix_csv(matrix: &TraceMatrix) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["row\\col".to_string()];
    header.extend(matrix.cols.iter().map(ToString::to_string));
    w.write_record(&header).expect("in-memory write");
    for r in &matrix.rows {
        let mut rec = vec![r.to_string()];
        for c in &matrix.cols {
            let cell = matrix
                .cell(r, c)
                .map(|ts| {
                    ts.iter()
                        .map(|t| t.initial().to_string())
                        .collect::<Vec<_>>()
                        .join("+")
                })
                .unwrap_or_default();
            rec.push(cell);
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{g1_graph, id};
    use crate::graph::{NodeInput, TraceGraph};
    use crate::model::Source;

    fn ids(gaps: &[Gap]) -> Vec<(String, String)> {
        gaps.iter().map(|g| (g.node.to_string(), g.rule.clone())).collect()
    }

    #[test]
    fn default_rules_per_dal() {
        let rs = default_ruleset();
        let at = |d| rs.rules_at(d).map(|r| r.rule_id.clone()).collect::<Vec<_>>();
        assert!(at(DalLevel::E).is_empty());
        assert!(!rs.checks_suspects_at(DalLevel::E));
        assert_eq!(at(DalLevel::A), ["R1", "R2", "R3", "R4", "R5", "R6", "R7"]);
        assert_eq!(at(DalLevel::D), ["R1", "R4", "R6"]);
        assert!(rs.checks_suspects_at(DalLevel::D));
    }

    #[test]
    fn rule_file_grammar() {
        let empty = load_ruleset("").unwrap();
        assert_eq!(empty.name, "unnamed");
        assert!(empty.rules.is_empty());
        let one = load_ruleset("rule R1 HLR out SATISFIES min=1 exempt-derived dal=ABCD").unwrap();
        assert_eq!(one.rules[0], default_ruleset().rules[0]);
        assert_eq!(
            load_ruleset("rule Rx FOO out SATISFIES min=1 dal=A"),
            Err(RuleError::UnknownKind { line: 1, kind: "FOO".into() })
        );
    }

    #[test]
    fn rule_file_errors() {
        let cases = [
            ("rule R1 HLR out NOPE min=1 dal=A", "UnknownLinkType"),
            ("rule R1 HLR out SATISFIES min=1 dal=AZ", "BadDalSet"),
            ("rule R1 HLR out SATISFIES min=1 dal=", "BadDalSet"),
            ("rule R1 HLR out SATISFIES min=0 dal=A", "SyntaxError"),
            ("rule R1 HLR sideways SATISFIES min=1 dal=A", "SyntaxError"),
            ("frobnicate", "SyntaxError"),
            ("suspect dal=AA", "BadDalSet"),
        ];
        for (text, want) in cases {
            let err = load_ruleset(text).unwrap_err();
            assert!(format!("{err:?}").starts_with(want), "{text}: {err:?}");
        }
        let dup = "rule R1 HLR out SATISFIES min=1 dal=A\n\nrule R1 LLR in VERIFIES min=1 dal=A";
        assert_eq!(load_ruleset(dup).unwrap_err().line(), 3);
    }

    #[test]
    fn full_default_file_round_trips() {
        let text = "# defaults\nname default\n\
            rule R1 HLR out SATISFIES min=1 exempt-derived dal=ABCD\n\
            rule R2 LLR out REFINES min=1 exempt-derived dal=ABC\n\
            rule R3 LLR in IMPLEMENTS min=1 dal=ABC\n\
            rule R4 HLR in VERIFIES min=1 dal=ABCD\n\
            rule R5 LLR in VERIFIES min=1 dal=AB\n\
            rule R6 TC in RECORDS min=1 dal=ABCD\n\
            rule R7 SRC out IMPLEMENTS min=1 dal=ABC\n\
            suspect dal=ABCD\n";
        assert_eq!(load_ruleset(text).unwrap(), default_ruleset());
    }

    #[test]
    fn g1_gaps() {
        let g = g1_graph();
        let rs = default_ruleset();
        let a = check_coverage(&g, DalLevel::A, &rs);
        assert_eq!(
            ids(&a.gaps),
            [("HLR-2".into(), "R4".into()), ("LLR-1".into(), "R5".into())]
        );
        assert!(a.gaps.iter().all(|g| g.kind == GapKind::MissingLink));
        assert!(check_coverage(&g, DalLevel::E, &rs).is_compliant());
        assert!(check_coverage(&TraceGraph::new(), DalLevel::A, &rs).is_compliant());
    }

    #[test]
    fn suspect_links_are_gaps() {
        let mut g = g1_graph();
        g.upsert_node(
            NodeInput::new(id("TR-1"), ArtifactKind::TestResult, Source::ReqStore).body("fail"),
        )
        .unwrap();
        let r = check_coverage(&g, DalLevel::D, &default_ruleset());
        assert_eq!(ids(&r.gaps), [("HLR-2".into(), "R4".into()), ("TR-1".into(), "SUSPECT".into())]);
        assert!(check_coverage(&g, DalLevel::E, &default_ruleset()).is_compliant());
    }

    #[test]
    fn matrices() {
        let g = g1_graph();
        let sat = BTreeSet::from([LinkType::Satisfies]);
        let m = build_trace_matrix(
            &g,
            ArtifactKind::HighLevelRequirement,
            ArtifactKind::SystemRequirement,
            &sat,
        )
        .unwrap();
        assert_eq!(m.rows, [id("HLR-1"), id("HLR-2")]);
        assert_eq!(m.cols, [id("SYS-1")]);
        assert_eq!(m.cell(&id("HLR-1"), &id("SYS-1")), Some(&sat));
        assert_eq!(m.cell(&id("HLR-2"), &id("SYS-1")), None);
        assert_eq!(export_matrix_csv(&m), "row\\col,SYS-1\nHLR-1,S\nHLR-2,\n");
        assert_eq!(export_matrix_csv(&m), export_matrix_csv(&m));

        let tc = build_trace_matrix(
            &g,
            ArtifactKind::TestCase,
            ArtifactKind::LowLevelRequirement,
            &BTreeSet::from([LinkType::Verifies]),
        )
        .unwrap();
        assert_eq!((tc.rows.len(), tc.cols.len(), tc.cells.len()), (1, 1, 0));

        // reversed orientation still finds the link
        let rev = build_trace_matrix(
            &g,
            ArtifactKind::SystemRequirement,
            ArtifactKind::HighLevelRequirement,
            &sat,
        )
        .unwrap();
        assert_eq!(export_matrix_csv(&rev), "row\\col,HLR-1,HLR-2\nSYS-1,S,\n");
    }

    #[test]
    fn empty_and_incompatible_matrices() {
        let m = build_trace_matrix(
            &TraceGraph::new(),
            ArtifactKind::HighLevelRequirement,
            ArtifactKind::SystemRequirement,
            &BTreeSet::from([LinkType::Satisfies]),
        )
        .unwrap();
        assert_eq!(export_matrix_csv(&m), "row\\col\n");
        let err = build_trace_matrix(
            &g1_graph(),
            ArtifactKind::TestCase,
            ArtifactKind::SystemRequirement,
            &BTreeSet::from([LinkType::Verifies]),
        )
        .unwrap_err();
        assert_eq!(err.types, [LinkType::Verifies]);
    }
}
