mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use serde_json::{json, Value};

use traceforge::change::{CrState, ImpactConfig, Resolution};
use traceforge::fixtures::{self, id};
use traceforge::ingest::IngestFormat;
use traceforge::model::LinkType;
use traceforge::project::Store;
use traceforge::service::router;
use traceforge::time::SteppingClock;

use common::*;

const BASE: &str = "/api/v1/projects/demo";

fn stepping_store(dir: &std::path::Path) -> Store {
    Store::new(dir).with_clock(Arc::new(SteppingClock::default()))
}

fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Runtime::new().unwrap()
}

#[test]
fn http_mutations_log_the_same_events_as_direct_calls() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());

    let app = router(stepping_store(a.path()));
    let rt = rt();
    let post = |uri: &str, body: Value| {
        let (status, text) = rt.block_on(http(&app, "POST", uri, Some(&body.to_string())));
        assert!(status < 300, "{uri}: {status} {text}");
        text
    };
    post("/api/v1/projects", json!({ "name": "demo" }));
    post(&format!("{BASE}/ingest"), json!({ "format": "csv", "content": fixtures::REQUIREMENTS_CSV }));
    post(&format!("{BASE}/ingest"), json!({ "format": "issues", "content": fixtures::ISSUES_JSON }));
    post(&format!("{BASE}/ingest"), json!({ "format": "vcslog", "content": fixtures::VCS_JSONL }));
    post(&format!("{BASE}/links"), json!({ "from": "TC-1", "type": "VERIFIES", "to": "LLR-1" }));
    post(
        &format!("{BASE}/crs"),
        json!({ "title": "boot", "seeds": ["HLR-1"], "types": ["SATISFIES", "REFINES", "IMPLEMENTS", "VERIFIES"] }),
    );
    post(&format!("{BASE}/crs/CR-1/transition"), json!({ "target": "Analyzed" }));
    post(&format!("{BASE}/crs/CR-1/items/HLR-1/resolve"), json!({ "resolution": "resolved", "note": "ok" }));
    post(&format!("{BASE}/baselines"), json!({ "name": "r1" }));
    let (_, api_events) = rt.block_on(http(&app, "GET", &format!("{BASE}/events"), None));

    let store = stepping_store(b.path());
    let mut p = store.create_project("demo").unwrap();
    p.ingest(IngestFormat::Csv, fixtures::REQUIREMENTS_CSV.as_bytes()).unwrap();
    p.ingest(IngestFormat::Issues, fixtures::ISSUES_JSON.as_bytes()).unwrap();
    p.ingest(IngestFormat::Vcslog, fixtures::VCS_JSONL.as_bytes()).unwrap();
    p.add_link(&id("TC-1"), &id("LLR-1"), LinkType::Verifies).unwrap();
    let config = ImpactConfig::with_types([LinkType::Satisfies, LinkType::Refines, LinkType::Implements, LinkType::Verifies]);
    p.create_cr("boot", "", &BTreeSet::from([id("HLR-1")]), &config).unwrap();
    p.transition_cr("CR-1", CrState::Analyzed).unwrap();
    p.resolve_item("CR-1", &id("HLR-1"), Resolution::Resolved, "ok").unwrap();
    p.create_baseline("r1").unwrap();

    let log = |dir: &std::path::Path| std::fs::read(dir.join("demo/events.log")).unwrap();
    assert_eq!(log(a.path()), log(b.path()));
    assert_eq!(api_events, traceforge::api::events_body(p.events()).text);
    let idx = |dir: &std::path::Path| std::fs::read(dir.join("demo/baselines/BL-1.idx")).unwrap();
    assert_eq!(idx(a.path()), idx(b.path()));
}

#[test]
fn errors_map_to_statuses_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    cli_g1(tmp.path());
    assert_eq!(cli(tmp.path(), &["cr", "create", "--title", "t", "--seed", "HLR-1"]).0, 0);
    let app = router(Store::new(tmp.path()));
    let rt = rt();
    let base = "/api/v1/projects/default";
    let cases: Vec<(Vec<&str>, &str, String, Option<&str>, u16, u8, &str)> = vec![
        (vec!["node", "NOPE-1"], "GET", format!("{base}/nodes/NOPE-1"), None, 404, 2, "NotFound"),
        (vec!["check", "--dal", "Z"], "GET", format!("{base}/coverage?dal=Z"), None, 400, 2, "ValidationError"),
        (
            vec!["link", "add", "TC-1", "VERIFIES", "SYS-1"],
            "POST",
            format!("{base}/links"),
            Some(r#"{"from":"TC-1","type":"VERIFIES","to":"SYS-1"}"#),
            400,
            2,
            "TypeMatrixViolation",
        ),
        (
            vec!["link", "add", "HLR-1", "SATISFIES", "SYS-1"],
            "POST",
            format!("{base}/links"),
            Some(r#"{"from":"HLR-1","type":"SATISFIES","to":"SYS-1"}"#),
            409,
            2,
            "Duplicate",
        ),
        (
            vec!["report", "matrix", "--rows", "HLR", "--cols", "SYS", "--types", "RECORDS"],
            "GET",
            format!("{base}/matrix?rows=HLR&cols=SYS&types=RECORDS"),
            None,
            400,
            2,
            "IncompatibleTypes",
        ),
        (vec!["cr", "show", "CR-7"], "GET", format!("{base}/crs/CR-7"), None, 404, 2, "NotFound"),
        (
            vec!["cr", "transition", "CR-1", "Closed"],
            "POST",
            format!("{base}/crs/CR-1/transition"),
            Some(r#"{"target":"Closed"}"#),
            409,
            2,
            "IllegalTransition",
        ),
    ];
    for (args, method, uri, body, status, code, error_code) in cases {
        let mut argv = vec!["--json"];
        argv.extend(&args);
        let (exit, out, _) = cli(tmp.path(), &argv);
        let (st, api) = rt.block_on(http(&app, method, &uri, body));
        assert_eq!((st, exit), (status, code), "{args:?}: {api}");
        assert_eq!(out, api, "{args:?}");
        let v: Value = serde_json::from_str(&api).unwrap();
        assert_eq!(v["error_code"], error_code, "{args:?}: {api}");
    }
}

#[test]
fn unknown_routes_and_bad_bodies_are_json_errors() {
    let tmp = tempfile::tempdir().unwrap();
    cli_g1(tmp.path());
    let app = router(Store::new(tmp.path()));
    let rt = rt();
    for (method, uri, body, status) in [
        ("GET", "/api/v1/nope", None, 404),
        ("GET", "/api/v1/projects/missing/nodes", None, 404),
        ("POST", "/api/v1/projects/default/links", Some("{not json"), 400),
        ("POST", "/api/v1/projects/default/crs", Some(r#"{"title":"x","seeds":[]}"#), 400),
        ("POST", "/api/v1/projects", Some(r#"{"name":"default"}"#), 409),
        ("POST", "/api/v1/projects/default/ingest", Some(r#"{"format":"csv","content":"id\n"}"#), 422),
    ] {
        let (st, text) = rt.block_on(http(&app, method, uri, body));
        assert_eq!(st, status, "{method} {uri}: {text}");
        let v: Value = serde_json::from_str(&text).unwrap();
        assert!(v["error_code"].is_string() && v["message"].is_string(), "{text}");
    }
}

fn word() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec![
        "check", "--dal", "A", "E", "Q", "impact", "--seed", "HLR-1", "NO-SUCH", "--types", "VERIFIES", "BOGUS",
        "--depth", "1", "x", "cr", "list", "show", "CR-1", "transition", "Approved", "resolve", "baseline", "create",
        "diff", "BL-1", "BL-2", "report", "matrix", "--rows", "HLR", "--cols", "SYS", "nodes", "--kind", "node",
        "events", "--since", "export", "--format", "dot", "json", "link", "add", "remove", "SATISFIES", "SYS-1",
        "verify-log", "--json", "--title", "t", "--fail-on-diff",
    ])
}

fn shared_home() -> &'static std::path::Path {
    static HOME: std::sync::OnceLock<tempfile::TempDir> = std::sync::OnceLock::new();
    HOME.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        cli_g1(tmp.path());
        tmp
    })
    .path()
}

proptest! {
    #![proptest_config(proptest_config(96))]

    #[test]
    fn exit_codes_follow_the_contract(words in prop::collection::vec(word(), 1..7)) {
        let home = shared_home();
        let (code, out, err) = cli(home, &words);
        prop_assert!(code <= 4, "exit {code}");
        if code >= 2 {
            prop_assert!(!err.is_empty(), "{words:?} failed silently");
            if words.contains(&"--json") && !out.is_empty() {
                let v: Value = serde_json::from_str(&out).map_err(|e| TestCaseError::fail(format!("{words:?}: {e}: {out}")))?;
                prop_assert!(v["error_code"].is_string());
            }
        }
        if code == 1 {
            let first = words.iter().find(|w| !w.starts_with('-')).copied();
            prop_assert!(matches!(first, Some("check") | Some("baseline")), "{words:?} exited 1");
        }
        prop_assert!(store_verifies(home));
    }
}

fn store_verifies(home: &std::path::Path) -> bool {
    Store::new(home).verify_project("default").map(|r| r.is_ok()).unwrap_or(false)
}
