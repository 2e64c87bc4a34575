use super::{
    parse_attribute_cell, parse_derived, requirement_kind, Diagnostic, Location, Parsed,
    RequirementRecord,
};
use crate::model::ArtifactId;

pub const REQUIREMENTS_HEADER: [&str; 7] =
    ["id", "kind", "title", "body", "parent_id", "derived", "attributes"];

/// Parses an RFC 4180 requirements export with the fixed seven-column
/// header. Bad rows are reported and skipped; parsing continues.
pub fn parse_requirements_csv(text: &str) -> Parsed<RequirementRecord> {
    let mut out = Parsed::default();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.trim_start_matches('\u{feff}').as_bytes());
    let mut rows = reader.records();

    match rows.next() {
        Some(Ok(header)) if header.iter().eq(REQUIREMENTS_HEADER.iter().copied()) => {}
        Some(Ok(header)) => {
            out.diagnostics.push(Diagnostic::error(
                Location::Row(header.position().map_or(1, |p| p.line())),
                "MissingHeader",
                format!("expected header {:?}", REQUIREMENTS_HEADER.join(",")),
            ));
            return out;
        }
        Some(Err(e)) => {
            out.diagnostics.push(Diagnostic::error(
                Location::Row(e.position().map_or(1, |p| p.line())),
                "MissingHeader",
                format!("unreadable header: {e}"),
            ));
            return out;
        }
        None => {
            out.diagnostics.push(Diagnostic::error(
                Location::Document,
                "MissingHeader",
                "empty input",
            ));
            return out;
        }
    }

    for row in rows {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.diagnostics.push(Diagnostic::error(
                    Location::Row(line),
                    "MalformedRow",
                    e.to_string(),
                ));
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        let loc = Location::Row(line);
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != REQUIREMENTS_HEADER.len() {
            out.diagnostics.push(Diagnostic::error(
                loc,
                "MalformedRow",
                format!("expected 7 fields, got {}", row.len()),
            ));
            continue;
        }
        match record_from_fields(&row) {
            Ok(rec) => out.records.push(rec),
            Err((code, msg)) => out.diagnostics.push(Diagnostic::error(loc, code, msg)),
        }
    }
    out
}

fn record_from_fields(row: &csv::StringRecord) -> Result<RequirementRecord, (&'static str, String)> {
    let id = ArtifactId::new(row[0].trim()).map_err(|e| ("MalformedRow", e.to_string()))?;
    let kind = requirement_kind(row[1].trim())
        .ok_or_else(|| ("BadKindCode", format!("unknown kind code {:?}", &row[1])))?;
    let parent_id = match row[4].trim() {
        "" => None,
        p => Some(ArtifactId::new(p).map_err(|e| ("MalformedRow", format!("parent_id: {e}")))?),
    };
    let derived = parse_derived(&row[5])
        .ok_or_else(|| ("MalformedRow", format!("derived must be true/false, got {:?}", &row[5])))?;
    let mut attributes =
        parse_attribute_cell(&row[6]).map_err(|e| ("MalformedRow", e))?;
    attributes.remove("derived");
    Ok(RequirementRecord {
        id,
        kind,
        title: row[2].to_string(),
        body: row[3].to_string(),
        parent_id,
        derived,
        attributes,
    })
}
