//! Result serialization: TSV and JSON.

use serde_json::{json, Map, Value};

use crate::dictionary::{LiteralTag, Term};
use crate::exec::ResultRow;

/// Header of `?var` names, then one line per row with terms in N-Triples form; unbound is an empty field.
pub fn to_tsv(columns: &[String], rows: &[ResultRow]) -> String {
    let mut out = String::new();
    let header: Vec<String> = columns.iter().map(|c| format!("?{c}")).collect();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|c| c.as_ref().map(|t| t.to_string()).unwrap_or_default()).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

pub fn term_json(t: &Term) -> Value {
    match t {
        Term::Iri(s) => json!({"type": "uri", "value": s}),
        Term::BlankNode(s) => json!({"type": "bnode", "value": s}),
        Term::Literal { lexical, tag } => match tag {
            LiteralTag::Plain => json!({"type": "literal", "value": lexical}),
            LiteralTag::Lang(l) => json!({"type": "literal", "value": lexical, "xml:lang": l}),
            LiteralTag::Typed(dt) => json!({"type": "literal", "value": lexical, "datatype": dt}),
        },
    }
}

/// Array of binding objects keyed by variable name; unbound variables are omitted.
pub fn to_json(columns: &[String], rows: &[ResultRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                let mut m = Map::new();
                for (c, v) in columns.iter().zip(r) {
                    if let Some(t) = v {
                        m.insert(c.clone(), term_json(t));
                    }
                }
                Value::Object(m)
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_renders_unbound_as_empty() {
        let cols = vec!["a".to_string(), "b".to_string()];
        let rows = vec![vec![Some(Term::iri("x")), None], vec![Some(Term::integer(3)), Some(Term::plain("q"))]];
        assert_eq!(
            to_tsv(&cols, &rows),
            "?a\t?b\n<x>\t\n\"3\"^^<http://www.w3.org/2001/XMLSchema#integer>\t\"q\"\n"
        );
    }

    #[test]
    fn json_omits_unbound() {
        let cols = vec!["a".to_string(), "b".to_string()];
        let rows = vec![vec![Some(Term::lang("hi", "en")), None]];
        let v = to_json(&cols, &rows);
        assert_eq!(v, json!([{"a": {"type": "literal", "value": "hi", "xml:lang": "en"}}]));
    }
}
