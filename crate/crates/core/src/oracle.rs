//! Brute-force reference evaluator.
//!
//! Evaluates the query AST directly over decoded triples with nested loops,
//! sharing no code with the planner or either executor. Used as the
//! correctness oracle in tests.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::aggregate::AggFunc;
use crate::dictionary::Term;
use crate::exec::ResultRow;
use crate::expr::CompareOp;
use crate::query::{ExprAst, GroupPattern, Query, SelectItem, TermOrVar};
use crate::storage::TripleStore;

type Solution = BTreeMap<String, Term>;

pub fn evaluate(store: &TripleStore, q: &Query) -> Vec<ResultRow> {
    let d = store.dictionary();
    let triples: Vec<[Term; 3]> = store
        .triples()
        .map(|t| [t.s, t.p, t.o].map(|id| d.decode(id).unwrap().clone()))
        .collect();
    let sols = eval_group(&triples, &q.body);
    let columns = q.result_vars();
    let mut rows: Vec<ResultRow> = if q.is_aggregate() {
        aggregate(store, q, &sols)
    } else {
        sols.iter().map(|s| columns.iter().map(|c| s.get(c).cloned()).collect()).collect()
    };
    if q.distinct {
        let mut seen = HashSet::new();
        rows.retain(|r| seen.insert(r.clone()));
    }
    if let Some(n) = q.limit {
        rows.truncate(n);
    }
    rows
}

fn eval_group(triples: &[[Term; 3]], g: &GroupPattern) -> Vec<Solution> {
    let mut sols = vec![Solution::new()];
    for p in &g.patterns {
        let mut next = Vec::new();
        for s in &sols {
            for t in triples {
                let mut ext = s.clone();
                if [&p.s, &p.p, &p.o].iter().zip(t).all(|(pat, val)| bind(&mut ext, pat, val)) {
                    next.push(ext);
                }
            }
        }
        sols = next;
    }
    for u in &g.unions {
        let branch: Vec<Solution> = u.iter().flat_map(|b| eval_group(triples, b)).collect();
        let mut next = Vec::new();
        for a in &sols {
            for b in &branch {
                if a.iter().all(|(k, v)| b.get(k).is_none_or(|w| w == v)) {
                    let mut m = a.clone();
                    m.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
                    next.push(m);
                }
            }
        }
        sols = next;
    }
    sols.retain(|s| g.filters.iter().all(|f| holds(f, s)));
    sols
}

fn bind(sol: &mut Solution, pat: &TermOrVar, val: &Term) -> bool {
    match pat {
        TermOrVar::Term(t) => t == val,
        TermOrVar::Var(v) => match sol.get(v) {
            Some(existing) => existing == val,
            None => {
                sol.insert(v.clone(), val.clone());
                true
            }
        },
    }
}

fn holds(f: &ExprAst, s: &Solution) -> bool {
    match f {
        ExprAst::Bound(v) => s.contains_key(v),
        ExprAst::Compare { op, left, right } => {
            let get = |o: &TermOrVar| match o {
                TermOrVar::Var(v) => s.get(v).cloned(),
                TermOrVar::Term(t) => Some(t.clone()),
            };
            let (Some(a), Some(b)) = (get(left), get(right)) else {
                return false;
            };
            match op {
                CompareOp::Eq => a == b,
                CompareOp::Ne => a != b,
                _ => match (a.integer_value(), b.integer_value()) {
                    (Some(x), Some(y)) => match op {
                        CompareOp::Lt => x < y,
                        CompareOp::Le => x <= y,
                        CompareOp::Gt => x > y,
                        _ => x >= y,
                    },
                    _ => false,
                },
            }
        }
    }
}

fn aggregate(store: &TripleStore, q: &Query, sols: &[Solution]) -> Vec<ResultRow> {
    let mut groups: Vec<(Option<Term>, Vec<&Solution>)> = Vec::new();
    let mut index: HashMap<Option<Term>, usize> = HashMap::new();
    for s in sols {
        let key = q.group_by.as_ref().and_then(|g| s.get(g).cloned());
        let i = *index.entry(key.clone()).or_insert_with(|| {
            groups.push((key, Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(s);
    }
    if q.group_by.is_none() && groups.is_empty() {
        groups.push((None, Vec::new()));
    }
    let empty_global = q.group_by.is_none() && sols.is_empty();
    groups
        .iter()
        .map(|(key, members)| {
            q.select
                .iter()
                .map(|item| match item {
                    SelectItem::Var(_) => key.clone(),
                    SelectItem::Aggregate(a) => {
                        let values: Vec<&Term> = members.iter().filter_map(|s| a.arg.as_ref().and_then(|v| s.get(v))).collect();
                        if empty_global && !matches!(a.func, AggFunc::CountAll | AggFunc::Count | AggFunc::CountDistinct) {
                            return None;
                        }
                        agg_value(store, a.func, members.len(), &values)
                    }
                })
                .collect()
        })
        .collect()
}

fn agg_value(store: &TripleStore, func: AggFunc, rows: usize, values: &[&Term]) -> Option<Term> {
    let order_key = |t: &Term| {
        let id = store.dictionary().lookup(t).map_or(u64::MAX, |i| i.0);
        match t.integer_value() {
            Some(v) => (0u8, v, id),
            None => (1u8, 0, id),
        }
    };
    let ints = || values.iter().map(|t| t.integer_value()).collect::<Option<Vec<i64>>>();
    match func {
        AggFunc::CountAll => Some(Term::integer(rows as i64)),
        AggFunc::Count => Some(Term::integer(values.len() as i64)),
        AggFunc::CountDistinct => Some(Term::integer(values.iter().collect::<HashSet<_>>().len() as i64)),
        AggFunc::Min => values.iter().min_by_key(|t| order_key(t)).map(|t| (*t).clone()),
        AggFunc::Max => values.iter().max_by_key(|t| order_key(t)).map(|t| (*t).clone()),
        AggFunc::Sum => ints().map(|v| {
            let s: i128 = v.iter().map(|x| *x as i128).sum();
            Term::typed(s.to_string(), crate::dictionary::XSD_INTEGER)
        }),
        AggFunc::Avg => ints().map(|v| {
            let s: i128 = v.iter().map(|x| *x as i128).sum();
            Term::decimal(if v.is_empty() { 0.0 } else { s as f64 / v.len() as f64 })
        }),
    }
}

/// Sorted copy of a row multiset, for order-insensitive comparison.
pub fn canonical(rows: &[ResultRow]) -> Vec<ResultRow> {
    let mut keyed: Vec<(String, ResultRow)> = rows.iter().map(|r| (format!("{r:?}"), r.clone())).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.into_iter().map(|(_, r)| r).collect()
}

pub fn same_multiset(a: &[ResultRow], b: &[ResultRow]) -> bool {
    a.len() == b.len() && canonical(a) == canonical(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;

    fn ex(s: &str) -> Term {
        Term::iri(format!("http://example.org/{s}"))
    }

    fn store() -> TripleStore {
        let mut st = TripleStore::new();
        for (s, p, o) in [("Alice", "knows", "Bob"), ("Alice", "knows", "Charlie"), ("Bob", "worksAt", "ACME")] {
            st.insert_terms(&ex(s), &ex(p), &ex(o)).unwrap();
        }
        st.insert_terms(&ex("Bob"), &ex("age"), &Term::integer(30)).unwrap();
        st.insert_terms(&ex("Charlie"), &ex("age"), &Term::integer(20)).unwrap();
        st.freeze();
        st
    }

    #[test]
    fn bgp_solution() {
        let q = parse_query("SELECT ?person ?company { :Alice :knows ?person . ?person :worksAt ?company }").unwrap();
        assert_eq!(evaluate(&store(), &q), vec![vec![Some(ex("Bob")), Some(ex("ACME"))]]);
    }

    #[test]
    fn aggregates_and_filters() {
        let st = store();
        let q = parse_query("SELECT (SUM(?a) AS ?s) (MIN(?a) AS ?m) (COUNT(*) AS ?n) { :Alice :knows ?p . ?p :age ?a FILTER(?a > 10) }").unwrap();
        assert_eq!(
            evaluate(&st, &q),
            vec![vec![Some(Term::integer(50)), Some(Term::integer(20)), Some(Term::integer(2))]]
        );
        let q = parse_query("SELECT (COUNT(*) AS ?n) (MAX(?a) AS ?m) { ?p :age ?a FILTER(?a > 100) }").unwrap();
        assert_eq!(evaluate(&st, &q), vec![vec![Some(Term::integer(0)), None]]);
    }

    #[test]
    fn union_is_bag_union() {
        let q = parse_query("SELECT ?x { { :Alice :knows ?x } UNION { ?x :worksAt :ACME } }").unwrap();
        let rows = evaluate(&store(), &q);
        assert!(same_multiset(
            &rows,
            &[vec![Some(ex("Bob"))], vec![Some(ex("Charlie"))], vec![Some(ex("Bob"))]]
        ));
    }
}
