//! Record a session in a project store, then verify and replay its log.

use traceforge::events::read_log;
use traceforge::fixtures;
use traceforge::ingest::IngestFormat;
use traceforge::project::{replay, Store};

fn main() {
    let home = tempfile::tempdir().unwrap();
    let store = Store::new(home.path());
    let mut p = store.create_project("demo").unwrap();
    p.ingest(IngestFormat::Csv, fixtures::REQUIREMENTS_CSV.as_bytes()).unwrap();
    p.ingest(IngestFormat::Vcslog, fixtures::VCS_JSONL.as_bytes()).unwrap();
    p.create_baseline("r1").unwrap();
    for e in p.events() {
        println!("{:>3} {:?} {}", e.seq, e.kind, &e.hash[..12]);
    }
    let live = p.graph().to_json();
    drop(p);

    let bytes = std::fs::read(home.path().join("demo/events.log")).unwrap();
    let state = replay("demo", &read_log(&bytes, false).unwrap().events).unwrap();
    println!("replay matches: {}", state.graph.to_json() == live);
    println!("verify: {}", store.verify_project("demo").unwrap().is_ok());

    let mut bad = bytes.clone();
    let i = bad.len() / 2;
    bad[i] ^= 0x01;
    let caught = read_log(&bad, false).map(|r| replay("demo", &r.events).is_err()).unwrap_or(true);
    println!("flipped byte {i} detected: {caught}");
}
