//! Replays the fuzz corpus through the parsers on stable so the seeds stay valid inputs.

use std::path::PathBuf;

use pxlap::config::parse_config_str;
use pxlap::expr::Expr;
use pxlap::mesh::parse_nodal_csv;

fn corpus(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect()
}

#[test]
fn expression_seeds_round_trip() {
    let vars = ["x", "y", "s1", "s2"];
    for (name, src) in corpus("expr") {
        let e = Expr::parse(&src, &vars).unwrap_or_else(|err| panic!("{name}: {err}"));
        let again = Expr::parse(&e.to_string(), &vars).unwrap();
        let at = [0.3, 0.7, 2.0, -0.5];
        assert!((e.eval(&at) - again.eval(&at)).abs() <= 1e-12 * e.eval(&at).abs().max(1.0), "{name}");
    }
}

#[test]
fn config_seeds_parse_or_report() {
    let seeds = corpus("config");
    for (name, text) in &seeds {
        match parse_config_str(text, name) {
            Ok(_) => {}
            Err(e) => assert!(!e.to_string().is_empty()),
        }
    }
    assert!(seeds.iter().any(|(n, t)| n != "errors" && parse_config_str(t, n).is_ok()));
}

#[test]
fn csv_seeds_do_not_panic() {
    let seeds = corpus("nodal_csv");
    let parsed = seeds.iter().filter(|(_, t)| parse_nodal_csv(t).is_ok()).count();
    assert!(parsed >= 2 && parsed < seeds.len());
}
