//! Freeze the graph twice and diff the two baselines.

use traceforge::baseline::{verify_baseline, BaselineRegistry};
use traceforge::fixtures::{g1_graph, id};
use traceforge::time::Timestamp;

fn main() {
    let mut g = g1_graph();
    let mut reg = BaselineRegistry::new();
    let b1 = reg.create(&g, "demo", "before", Timestamp::from_unix(0)).unwrap();
    print!("{}", b1.index);
    println!("hash {} ok={}", b1.index_hash, verify_baseline(b1));

    g.remove_node(&id("HLR-2")).unwrap();
    reg.create(&g, "demo", "after", Timestamp::from_unix(60)).unwrap();
    print!("{}", reg.diff("BL-1", "BL-2").unwrap().render_text());
}
