use chrono::{DateTime, Utc};
use serde_json::Value;

use super::{CommitRecord, Diagnostic, Location, Parsed};
use crate::model::ArtifactId;

/// Parses a JSON-lines commit log, one `{hash, author, date, files, message}`
/// object per line. Blank lines are skipped.
pub fn parse_vcs_log(text: &str) -> Parsed<CommitRecord> {
    let mut out = Parsed::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let loc = Location::Line(i as u64 + 1);
        match commit_from_line(line) {
            Ok(c) => out.records.push(c),
            Err(reason) => out.diagnostics.push(Diagnostic::error(loc, "BadLine", reason)),
        }
    }
    out
}

fn commit_from_line(line: &str) -> Result<CommitRecord, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let obj = v.as_object().ok_or("line is not a JSON object")?;
    let field = |name: &str| -> Result<&str, String> {
        obj.get(name)
            .and_then(Value::as_str)
            .ok_or_else(|| format!("missing string field {name:?}"))
    };
    let hash = field("hash")?;
    if !(7..=40).contains(&hash.len())
        || !hash.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
    {
        return Err(format!("hash {hash:?} is not 7-40 lowercase hex digits"));
    }
    let author = field("author")?;
    let date = field("date")?;
    let date = DateTime::parse_from_rfc3339(date)
        .map_err(|e| format!("date {date:?}: {e}"))?
        .with_timezone(&Utc);
    let files = obj
        .get("files")
        .and_then(Value::as_array)
        .ok_or("missing array field \"files\"")?;
    if files.is_empty() {
        return Err("files must not be empty".into());
    }
    let files = files
        .iter()
        .map(|f| match f.as_str() {
            Some(p) if !p.is_empty() && !p.contains(['\n', '\r']) => Ok(p.to_string()),
            _ => Err(format!("bad file path {f}")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let message = field("message")?;
    Ok(CommitRecord {
        hash: hash.to_string(),
        author: author.to_string(),
        date,
        files,
        message: message.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub enum TrailerKey {
    Implements,
    Verifies,
    Resolves,
    Refs,
}

impl TrailerKey {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "implements" => Some(TrailerKey::Implements),
            "verifies" => Some(TrailerKey::Verifies),
            "resolves" => Some(TrailerKey::Resolves),
            "refs" => Some(TrailerKey::Refs),
            _ => None,
        }
    }
}

/// Reads `Key: v1, v2` trailers from the final paragraph of a commit
/// message. Values that are not valid ids are dropped.
pub fn parse_trailers(message: &str) -> Vec<(TrailerKey, Vec<ArtifactId>)> {
    let lines: Vec<&str> = message.lines().collect();
    let end = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map_or(0, |i| i + 1);
    let start = lines[..end]
        .iter()
        .rposition(|l| l.trim().is_empty())
        .map_or(0, |i| i + 1);
    lines[start..end]
        .iter()
        .filter_map(|line| {
            let (key, values) = line.split_once(':')?;
            let key = TrailerKey::parse(key.trim())?;
            let ids = values
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .filter_map(|v| ArtifactId::new(v).ok())
                .collect();
            Some((key, ids))
        })
        .collect()
}
