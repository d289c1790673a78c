use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

const GRAPH: &str = "<http://example.org/Alice> <http://example.org/knows> <http://example.org/Bob> .
<http://example.org/Alice> <http://example.org/knows> <http://example.org/Charlie> .
<http://example.org/Bob> <http://example.org/worksAt> <http://example.org/ACME> .
";

fn vexec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vexec"))
        .args(args)
        .env_remove("VEXEC_MEMORY_CAP")
        .output()
        .unwrap()
}

fn file(content: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn load_reports_triple_count() {
    let f = file(GRAPH);
    let o = vexec(&["load", f.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("loaded 3 triples"), "{}", stdout(&o));
    let empty = file("");
    assert!(stdout(&vexec(&["load", empty.path().to_str().unwrap()])).starts_with("loaded 0 triples"));
}

#[test]
fn load_syntax_error_names_the_line() {
    let f = file(&format!("{GRAPH}<a> <b> .\n"));
    let o = vexec(&["load", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn query_tsv_under_every_engine() {
    let f = file(GRAPH);
    let q = "SELECT ?person ?company { :Alice :knows ?person . ?person :worksAt ?company }";
    for engine in ["batch", "barq", "legacy", "auto"] {
        let o = vexec(&["query", q, "--data", f.path().to_str().unwrap(), "--engine", engine]);
        assert!(o.status.success(), "{engine}");
        assert_eq!(
            stdout(&o),
            "?person\t?company\n<http://example.org/Bob>\t<http://example.org/ACME>\n"
        );
    }
}

#[test]
fn query_from_file_with_json_and_profile() {
    let data = file(GRAPH);
    let query = file("SELECT ?p { :Alice :knows ?p }");
    let o = vexec(&[
        "query",
        query.path().to_str().unwrap(),
        "--data",
        data.path().to_str().unwrap(),
        "--output",
        "json",
        "--profile",
        "--batch-max",
        "64",
        "--no-adaptive",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["p"]["type"], "uri");
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Scan(:Alice, :knows, ?p), results: 2"), "{err}");
}

#[test]
fn empty_store_gives_zero_rows() {
    let o = vexec(&["query", "SELECT * { ?s ?p ?o }"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "?s\t?p\t?o\n");
}

#[test]
fn exit_codes() {
    assert_eq!(vexec(&["query", "SELECT * { ?s :p }"]).status.code(), Some(2));
    assert_eq!(
        vexec(&["query", "SELECT * { ?s :p ?o OPTIONAL { ?o :q ?z } }"]).status.code(),
        Some(3)
    );
    let f = file(GRAPH);
    let o = Command::new(env!("CARGO_BIN_EXE_vexec"))
        .args([
            "query",
            "SELECT ?c (COUNT(*) AS ?n) { ?a :knows ?b . ?b :worksAt ?c } GROUP BY ?c",
            "--data",
            f.path().to_str().unwrap(),
            "--engine",
            "legacy",
        ])
        .env("VEXEC_MEMORY_CAP", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(vexec(&["query", "SELECT * { ?s ?p ?o }", "--data", "/nonexistent.nt"]).status.code(), Some(1));
}

#[test]
fn bench_prints_speedup_and_overfetch() {
    let o = vexec(&["bench", "selective_join", "--scale", "0.05", "--warmups", "0", "--runs", "1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("speedup (legacy / batch)"), "{out}");
    assert!(out.contains("batch-fixed / batch-adaptive"), "{out}");
    assert!(out.contains("Scan(?product, :productFeature, ?feature)"), "{out}");
    let json = vexec(&["bench", "two_hop", "--scale", "0.02", "--warmups", "0", "--runs", "1", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v[0]["suite"], "two_hop");
    assert_eq!(v[0]["runs"].as_array().unwrap().len(), 3);
    assert_eq!(vexec(&["bench", "nope"]).status.code(), Some(1));
}

#[test]
fn bench_datasets_are_deterministic() {
    let a = vexec(&["bench", "two_hop", "--seed", "5", "--scale", "0.02", "--warmups", "0", "--runs", "1", "--json"]);
    let b = vexec(&["bench", "two_hop", "--seed", "5", "--scale", "0.02", "--warmups", "0", "--runs", "1", "--json"]);
    let (a, b): (serde_json::Value, serde_json::Value) =
        (serde_json::from_str(&stdout(&a)).unwrap(), serde_json::from_str(&stdout(&b)).unwrap());
    assert_eq!(a[0]["triples"], b[0]["triples"]);
    for i in 0..3 {
        assert_eq!(a[0]["runs"][i]["rows_read"], b[0]["runs"][i]["rows_read"]);
        assert_eq!(a[0]["runs"][i]["scans"], b[0]["runs"][i]["scans"]);
    }
}
