use serde_json::Value;

use super::{Diagnostic, IssueRecord, IssueType, Location, Parsed};
use crate::model::{ArtifactId, LinkType};

/// Parses an issue-tracker export: a JSON array of
/// `{key, type, summary, status, links: [{type, target}]}` objects.
pub fn parse_issue_export(text: &str) -> Parsed<IssueRecord> {
    let mut out = Parsed::default();
    let doc: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            out.diagnostics.push(Diagnostic::error(
                Location::Line(e.line() as u64),
                "JsonMalformed",
                e.to_string(),
            ));
            return out;
        }
    };
    let Value::Array(items) = doc else {
        out.diagnostics.push(Diagnostic::error(
            Location::Document,
            "NotAnArray",
            "top-level value must be an array",
        ));
        return out;
    };
    for (index, item) in items.iter().enumerate() {
        let loc = Location::Index(index);
        let Some(obj) = item.as_object() else {
            out.diagnostics
                .push(Diagnostic::error(loc, "NotAnObject", "issue entry must be an object"));
            continue;
        };
        let key = match obj.get("key").and_then(Value::as_str) {
            Some(k) if !k.trim().is_empty() => k.trim(),
            _ => {
                out.diagnostics
                    .push(Diagnostic::error(loc, "MissingKey", "issue has no string \"key\""));
                continue;
            }
        };
        let key = match ArtifactId::new(key) {
            Ok(k) => k,
            Err(e) => {
                out.diagnostics.push(Diagnostic::error(loc, "BadKey", e.to_string()));
                continue;
            }
        };
        let type_name = obj.get("type").and_then(Value::as_str).unwrap_or_default();
        let Some(issue_type) = IssueType::parse(type_name) else {
            out.diagnostics.push(Diagnostic::error(
                loc,
                "BadIssueType",
                format!("{key}: issue type {type_name:?} is not defect, task or story"),
            ));
            continue;
        };
        let text_field = |name: &str| {
            obj.get(name)
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string()
        };
        let mut links = Vec::new();
        match obj.get("links") {
            None | Some(Value::Null) => {}
            Some(Value::Array(ls)) => {
                for (li, l) in ls.iter().enumerate() {
                    let rel = l.get("type").and_then(Value::as_str).unwrap_or_default();
                    let target = l.get("target").and_then(Value::as_str).unwrap_or_default();
                    if rel != "tracks" {
                        out.diagnostics.push(Diagnostic::warning(
                            loc.clone(),
                            "UnknownRelation",
                            format!("{key}: links[{li}] relation {rel:?} dropped"),
                        ));
                        continue;
                    }
                    match ArtifactId::new(target.trim()) {
                        Ok(t) => links.push((LinkType::Tracks, t)),
                        Err(e) => out.diagnostics.push(Diagnostic::warning(
                            loc.clone(),
                            "BadTarget",
                            format!("{key}: links[{li}]: {e}"),
                        )),
                    }
                }
            }
            Some(_) => out.diagnostics.push(Diagnostic::warning(
                loc.clone(),
                "BadLinks",
                format!("{key}: \"links\" is not an array; ignored"),
            )),
        }
        out.records.push(IssueRecord {
            key,
            issue_type,
            summary: text_field("summary"),
            status: text_field("status"),
            links,
        });
    }
    out
}
