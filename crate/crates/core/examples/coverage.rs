//! Check coverage at every assurance level, then with a custom rule file.

use traceforge::compliance::{check_coverage, default_ruleset, load_ruleset, DalLevel};
use traceforge::fixtures::g1_graph;

fn main() {
    let g = g1_graph();
    let rules = default_ruleset();
    for dal in [DalLevel::A, DalLevel::B, DalLevel::C, DalLevel::D, DalLevel::E] {
        let report = check_coverage(&g, dal, &rules);
        println!("DAL {dal}: {} gap(s)", report.gaps.len());
    }
    print!("{}", check_coverage(&g, DalLevel::A, &rules).render_text());

    let custom = "name tests-only\nrule T1 HLR in VERIFIES min=1 dal=AB\nrule T2 LLR in VERIFIES min=1 dal=A\n";
    match load_ruleset(custom) {
        Ok(rules) => print!("{}", check_coverage(&g, DalLevel::A, &rules).render_text()),
        Err(e) => println!("rule file: {e}"),
    }
    if let Err(e) = load_ruleset("name x\nrule T1 HLR sideways VERIFIES min=1 dal=A\n") {
        println!("rule file: {e}");
    }
}
