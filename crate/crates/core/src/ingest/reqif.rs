//! A deliberately small ReqIF reader.
//!
//! Only `SPEC-OBJECT` elements are read, using their `IDENTIFIER` and
//! `LONG-NAME` attributes, plus `ATTRIBUTE-VALUE-STRING` values whose
//! attribute definition is named `Kind`, `Body`, `Parent` or `Derived`.
//! Everything else is skipped with an info diagnostic.

use std::collections::BTreeMap;

use roxmltree::{Document, Node};

use super::{parse_derived, requirement_kind, Diagnostic, Location, Parsed, RequirementRecord};
use crate::model::ArtifactId;

pub fn parse_reqif_subset(text: &str) -> Parsed<RequirementRecord> {
    let mut out = Parsed::default();
    let doc = match Document::parse(text) {
        Ok(d) => d,
        Err(e) => {
            out.diagnostics.push(Diagnostic::error(
                Location::Line(e.pos().row as u64),
                "XmlMalformed",
                e.to_string(),
            ));
            return out;
        }
    };

    // attribute-definition IDENTIFIER -> LONG-NAME
    let definitions: BTreeMap<&str, &str> = doc
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name().starts_with("ATTRIBUTE-DEFINITION-"))
        .filter_map(|n| Some((n.attribute("IDENTIFIER")?, n.attribute("LONG-NAME")?)))
        .collect();

    let objects = doc
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "SPEC-OBJECT");
    for (index, obj) in objects.enumerate() {
        let line = doc.text_pos_at(obj.range().start).row;
        let loc = Location::SpecObject { index, line };
        match read_object(obj, &definitions, &loc, &mut out.diagnostics) {
            Ok(rec) => out.records.push(rec),
            Err(d) => out.diagnostics.push(d),
        }
    }
    out
}

fn read_object(
    obj: Node<'_, '_>,
    definitions: &BTreeMap<&str, &str>,
    loc: &Location,
    diags: &mut Vec<Diagnostic>,
) -> Result<RequirementRecord, Diagnostic> {
    let ident = obj
        .attribute("IDENTIFIER")
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| Diagnostic::error(loc.clone(), "MissingIdentifier", "SPEC-OBJECT has no IDENTIFIER"))?;
    let id = ArtifactId::new(ident.trim())
        .map_err(|e| Diagnostic::error(loc.clone(), "MalformedObject", e.to_string()))?;
    let title = obj.attribute("LONG-NAME").unwrap_or_default().to_string();

    let mut kind_code = None;
    let mut body = String::new();
    let mut parent = None;
    let mut derived = String::new();

    let values = obj
        .children()
        .filter(|c| c.is_element() && c.tag_name().name() == "VALUES")
        .flat_map(|v| v.children().filter(Node::is_element));
    for value in values {
        let tag = value.tag_name().name();
        if tag != "ATTRIBUTE-VALUE-STRING" {
            diags.push(Diagnostic::info(
                loc.clone(),
                "IgnoredValue",
                format!("{id}: {tag} is outside the supported subset"),
            ));
            continue;
        }
        let def_ref = value
            .descendants()
            .find(|n| n.is_element() && n.tag_name().name() == "ATTRIBUTE-DEFINITION-STRING-REF")
            .and_then(|n| n.text())
            .map(str::trim)
            .unwrap_or_default();
        let Some(name) = definitions.get(def_ref) else {
            diags.push(Diagnostic::info(
                loc.clone(),
                "IgnoredValue",
                format!("{id}: unresolved attribute definition {def_ref:?}"),
            ));
            continue;
        };
        let the_value = value.attribute("THE-VALUE").unwrap_or_default();
        match *name {
            "Kind" => kind_code = Some(the_value.trim().to_string()),
            "Body" => body = the_value.to_string(),
            "Parent" => parent = Some(the_value.trim().to_string()),
            "Derived" => derived = the_value.to_string(),
            other => diags.push(Diagnostic::info(
                loc.clone(),
                "IgnoredValue",
                format!("{id}: attribute {other:?} is outside the supported subset"),
            )),
        }
    }

    let code = kind_code.unwrap_or_default();
    let kind = requirement_kind(&code).ok_or_else(|| {
        Diagnostic::error(loc.clone(), "BadKindCode", format!("{id}: kind code {code:?}"))
    })?;
    let parent_id = match parent.as_deref() {
        None | Some("") => None,
        Some(p) => Some(ArtifactId::new(p).map_err(|e| {
            Diagnostic::error(loc.clone(), "MalformedObject", format!("{id}: Parent: {e}"))
        })?),
    };
    let derived = parse_derived(&derived).ok_or_else(|| {
        Diagnostic::error(loc.clone(), "MalformedObject", format!("{id}: Derived {derived:?}"))
    })?;
    Ok(RequirementRecord {
        id,
        kind,
        title,
        body,
        parent_id,
        derived,
        attributes: BTreeMap::new(),
    })
}
