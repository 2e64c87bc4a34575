//! Run CLI commands in-process against a throwaway home directory.

use traceforge::fixtures;

fn run(home: &std::path::Path, args: &[&str]) {
    let mut argv = vec!["traceforge", "--home", home.to_str().unwrap()];
    argv.extend(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = traceforge::cli::run(argv, &mut out, &mut err);
    println!("$ traceforge {} -> exit {code}", args.join(" "));
    print!("{}{}", String::from_utf8_lossy(&out), String::from_utf8_lossy(&err));
}

fn main() {
    let home = tempfile::tempdir().unwrap();
    let csv = home.path().join("reqs.csv");
    std::fs::write(&csv, fixtures::REQUIREMENTS_CSV).unwrap();
    run(home.path(), &["init"]);
    run(home.path(), &["ingest", "--format", "csv", csv.to_str().unwrap()]);
    run(home.path(), &["check", "--dal", "A"]);
    run(home.path(), &["impact", "--seed", "HLR-1"]);
    run(home.path(), &["baseline", "create", "r1"]);
    run(home.path(), &["verify-log"]);
}
