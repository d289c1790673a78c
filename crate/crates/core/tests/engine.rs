use std::sync::Arc;

use proptest::prelude::*;

use vexec::dictionary::Term;
use vexec::exec::{execute, EngineConfig, EngineError};
use vexec::ntriples::{dump, load, parse_document};
use vexec::operator::ExecError;
use vexec::oracle::{canonical, evaluate, same_multiset};
use vexec::plan::EngineMode;
use vexec::query::{parse_query, QueryError};
use vexec::storage::TripleStore;

fn ex(s: &str) -> Term {
    Term::iri(format!("http://example.org/{s}"))
}

fn store(triples: &[(u8, u8, u8)]) -> Arc<TripleStore> {
    let mut st = TripleStore::new();
    for &(s, p, o) in triples {
        st.insert_terms(&ex(&format!("e{s}")), &ex(&format!("p{p}")), &ex(&format!("e{o}"))).unwrap();
    }
    st.freeze();
    Arc::new(st)
}

fn modes() -> Vec<EngineConfig> {
    let mut v: Vec<EngineConfig> = [EngineMode::Batch, EngineMode::Legacy, EngineMode::Auto, EngineMode::Mixed(3)]
        .into_iter()
        .map(EngineConfig::new)
        .collect();
    let mut small = EngineConfig::new(EngineMode::Batch);
    small.exec.batch_max = 16;
    small.exec.adaptive = false;
    v.push(small);
    v
}

fn assert_matches_oracle(st: &Arc<TripleStore>, text: &str) {
    let expected = evaluate(st, &parse_query(text).unwrap());
    for cfg in modes() {
        let out = execute(st, text, &cfg).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert!(
            same_multiset(&out.rows, &expected),
            "{text} under {:?}: {:?} vs {:?}\n{}",
            cfg.mode,
            canonical(&out.rows),
            canonical(&expected),
            out.plan
        );
    }
}

const QUERIES: &[&str] = &[
    "SELECT * { ?a :p0 ?b . ?b :p1 ?c }",
    "SELECT ?a ?c { ?a :p0 ?b . ?b :p1 ?c . ?c :p2 ?a }",
    "SELECT DISTINCT ?a { ?a :p0 ?b . ?a :p1 ?c FILTER(?b != ?c) }",
    "SELECT * { ?a :p0 ?b { ?b :p1 ?c } UNION { ?b :p2 ?c } }",
    "SELECT ?b { { ?a :p0 ?b } UNION { ?a :p1 ?b } UNION { ?b :p2 :e1 . ?b :p2 ?a } }",
    "SELECT ?a (COUNT(DISTINCT ?b) AS ?n) (COUNT(*) AS ?m) { ?a :p0 ?b . ?b :p0 ?c } GROUP BY ?a",
    "SELECT ?c (MIN(?a) AS ?lo) (MAX(?a) AS ?hi) { ?a :p1 ?c } GROUP BY ?c",
    "SELECT (COUNT(*) AS ?n) { ?a ?p ?b . ?b :p0 ?a }",
    "SELECT * { ?a :p0 ?a }",
    "SELECT ?a { ?a :p0 :e1 . ?a :p1 ?b FILTER(?b != :e2) }",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn engines_match_oracle(triples in prop::collection::vec((0u8..12, 0u8..3, 0u8..12), 0..120)) {
        let st = store(&triples);
        for q in QUERIES {
            assert_matches_oracle(&st, q);
        }
    }

    #[test]
    fn limit_returns_a_prefix_sized_subset(triples in prop::collection::vec((0u8..10, 0u8..2, 0u8..10), 0..80), limit in 0usize..20) {
        let st = store(&triples);
        let full = evaluate(&st, &parse_query("SELECT * { ?a :p0 ?b . ?b :p1 ?c }").unwrap());
        let text = format!("SELECT * {{ ?a :p0 ?b . ?b :p1 ?c }} LIMIT {limit}");
        for cfg in modes() {
            let rows = execute(&st, &text, &cfg).unwrap().rows;
            prop_assert_eq!(rows.len(), limit.min(full.len()));
            for r in &rows {
                prop_assert!(full.contains(r));
            }
        }
    }

    #[test]
    fn ntriples_round_trip(triples in prop::collection::vec((0u8..20, 0u8..4, 0u8..20, any::<bool>()), 0..60)) {
        let mut st = TripleStore::new();
        for (s, p, o, lit) in triples {
            let obj = if lit { Term::lang(format!("v\t\"{o}\"\n"), "en") } else { ex(&format!("e{o}")) };
            st.insert_terms(&ex(&format!("e{s}")), &ex(&format!("p{p}")), &obj).unwrap();
        }
        st.freeze();
        let mut text = Vec::new();
        dump(&st, &mut text).unwrap();
        let again = load(text.as_slice()).unwrap();
        let mut text2 = Vec::new();
        dump(&again, &mut text2).unwrap();
        let a: std::collections::HashSet<_> = parse_document(text.as_slice()).unwrap().into_iter().collect();
        let b: std::collections::HashSet<_> = parse_document(text2.as_slice()).unwrap().into_iter().collect();
        prop_assert_eq!(a, b);
        prop_assert_eq!(st.len(), again.len());
    }
}

#[test]
fn alice_example() {
    let st = store(&[]);
    let out = execute(&st, "SELECT * { ?s ?p ?o }", &EngineConfig::default()).unwrap();
    assert!(out.rows.is_empty());

    let mut st = TripleStore::new();
    for (s, p, o) in [("Alice", "knows", "Bob"), ("Alice", "knows", "Charlie"), ("Bob", "worksAt", "ACME")] {
        st.insert_terms(&ex(s), &ex(p), &ex(o)).unwrap();
    }
    st.freeze();
    let st = Arc::new(st);
    let q = "SELECT ?person ?company { :Alice :knows ?person . ?person :worksAt ?company }";
    for cfg in modes() {
        let out = execute(&st, q, &cfg).unwrap();
        assert_eq!(out.columns, ["person", "company"]);
        assert_eq!(out.rows, vec![vec![Some(ex("Bob")), Some(ex("ACME"))]]);
    }
}

#[test]
fn unsupported_and_parse_errors() {
    let st = store(&[(0, 0, 1)]);
    let cfg = EngineConfig::default();
    for q in [
        "SELECT * { ?a :p0 ?b OPTIONAL { ?b :p1 ?c } }",
        "SELECT * { ?a :p0+ ?b }",
        "SELECT * { ?a :p0 ?b FILTER(?a != ?b || ?a != :e1) }",
        "SELECT * { ?a :p0 ?b } ORDER BY ?a",
    ] {
        match execute(&st, q, &cfg) {
            Err(EngineError::Query(QueryError::Unsupported { .. })) => {}
            other => panic!("{q}: {:?}", other.map(|o| o.rows)),
        }
    }
    match execute(&st, "SELECT * { ?a :p0 }", &cfg) {
        Err(EngineError::Query(QueryError::Parse { line, .. })) => assert_eq!(line, 1),
        other => panic!("{:?}", other.map(|o| o.rows)),
    }
}

#[test]
fn memory_cap_is_enforced() {
    let triples: Vec<(u8, u8, u8)> = (0..50).map(|i| (i % 7, 0, i % 11)).chain((0..50).map(|i| (i % 11, 1, i % 5))).collect();
    let st = store(&triples);
    let q = "SELECT ?a (COUNT(*) AS ?n) { ?a :p0 ?b . ?b :p1 ?c } GROUP BY ?a";
    for mode in [EngineMode::Batch, EngineMode::Legacy] {
        let mut cfg = EngineConfig::new(mode);
        cfg.exec.memory_cap = 8;
        match execute(&st, q, &cfg) {
            Err(EngineError::Exec(ExecError::QueryMemoryExceeded { .. })) => {}
            other => panic!("{mode:?}: {:?}", other.map(|o| o.rows)),
        }
        cfg.exec.memory_cap = 1 << 20;
        assert!(execute(&st, q, &cfg).is_ok());
    }
}

#[test]
fn engine_flag_never_changes_results_on_two_hop() {
    let st = Arc::new(vexec::bench::Suite::TwoHop.generate(3, 0.04));
    let outs: Vec<_> = modes()
        .into_iter()
        .map(|cfg| execute(&st, vexec::bench::TWO_HOP_QUERY, &cfg).unwrap().rows)
        .collect();
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
    let st = Arc::new(vexec::bench::Suite::GroupDistinct.generate(3, 0.02));
    let outs: Vec<_> = modes()
        .into_iter()
        .map(|cfg| canonical(&execute(&st, vexec::bench::GROUP_DISTINCT_QUERY, &cfg).unwrap().rows))
        .collect();
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}
