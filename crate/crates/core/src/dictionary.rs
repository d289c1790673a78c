//! RDF terms and their bidirectional mapping to 64-bit identifiers.
//!
//! Execution never touches [`Term`] values: scans, joins, filters and
//! grouping all operate on [`TermId`]s. Decoding happens once, when final
//! results are rendered.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";

/// Integer-valued XSD datatypes whose literals get an entry in the numeric side map.
const INTEGER_TYPES: &[&str] = &[
    "integer",
    "int",
    "long",
    "short",
    "byte",
    "nonNegativeInteger",
    "positiveInteger",
    "negativeInteger",
    "nonPositiveInteger",
    "unsignedLong",
    "unsignedInt",
    "unsignedShort",
    "unsignedByte",
];

/// Dictionary-encoded identifier of an RDF term.
///
/// `0` is the NULL marker used for unbound variables; it never maps to a term.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[repr(transparent)]
pub struct TermId(pub u64);

impl TermId {
    pub const NULL: TermId = TermId(0);

    #[inline]
    pub fn is_null(self) -> bool {
        self.0 == 0
    }

    /// Smallest id strictly greater than `self`.
    #[inline]
    pub fn successor(self) -> TermId {
        TermId(self.0.saturating_add(1))
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Annotation carried by a literal: none, a language tag or a datatype IRI.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LiteralTag {
    Plain,
    Lang(String),
    Typed(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Iri(String),
    BlankNode(String),
    Literal { lexical: String, tag: LiteralTag },
}

impl Term {
    pub fn iri(s: impl Into<String>) -> Term {
        Term::Iri(s.into())
    }

    pub fn blank(s: impl Into<String>) -> Term {
        Term::BlankNode(s.into())
    }

    pub fn plain(s: impl Into<String>) -> Term {
        Term::Literal {
            lexical: s.into(),
            tag: LiteralTag::Plain,
        }
    }

    pub fn lang(s: impl Into<String>, lang: impl Into<String>) -> Term {
        Term::Literal {
            lexical: s.into(),
            tag: LiteralTag::Lang(lang.into()),
        }
    }

    pub fn typed(s: impl Into<String>, datatype: impl Into<String>) -> Term {
        Term::Literal {
            lexical: s.into(),
            tag: LiteralTag::Typed(datatype.into()),
        }
    }

    pub fn integer(v: i64) -> Term {
        Term::typed(v.to_string(), XSD_INTEGER)
    }

    pub fn decimal(v: f64) -> Term {
        Term::typed(format!("{v}"), XSD_DECIMAL)
    }

    /// The integer value of an integer-typed literal, if it has one.
    pub fn integer_value(&self) -> Option<i64> {
        match self {
            Term::Literal {
                lexical,
                tag: LiteralTag::Typed(dt),
            } => {
                let local = dt.strip_prefix(XSD)?;
                if INTEGER_TYPES.contains(&local) {
                    lexical.trim().parse::<i64>().ok()
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Term::Iri(s) => !s.is_empty(),
            Term::BlankNode(s) => !s.is_empty(),
            Term::Literal { tag, .. } => match tag {
                LiteralTag::Plain => true,
                LiteralTag::Lang(l) => !l.is_empty(),
                LiteralTag::Typed(dt) => !dt.is_empty(),
            },
        }
    }
}

/// N-Triples rendering.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(s) => write!(f, "<{s}>"),
            Term::BlankNode(s) => write!(f, "_:{s}"),
            Term::Literal { lexical, tag } => {
                f.write_str("\"")?;
                for c in lexical.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
                match tag {
                    LiteralTag::Plain => Ok(()),
                    LiteralTag::Lang(l) => write!(f, "@{l}"),
                    LiteralTag::Typed(dt) => write!(f, "^^<{dt}>"),
                }
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DictionaryError {
    #[error("term id {0} is not assigned")]
    UnknownId(u64),
    #[error("term id 0 is the NULL marker and has no term")]
    NullId,
    #[error("dictionary is frozen")]
    Frozen,
    #[error("invalid term: {0:?}")]
    InvalidTerm(Term),
}

/// Bidirectional `Term <-> TermId` mapping with dense ids starting at 1.
#[derive(Debug, Default, Clone)]
pub struct Dictionary {
    forward: HashMap<Term, TermId>,
    // inverse[i] holds the term of id i + 1
    inverse: Vec<Term>,
    // numeric[i] holds the integer value of id i + 1, if any
    numeric: Vec<Option<i64>>,
    frozen: bool,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inverse.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Returns the id of `term`, assigning the next dense id on first sight.
    pub fn encode(&mut self, term: &Term) -> Result<TermId, DictionaryError> {
        if let Some(id) = self.forward.get(term) {
            return Ok(*id);
        }
        if self.frozen {
            return Err(DictionaryError::Frozen);
        }
        if !term.is_valid() {
            return Err(DictionaryError::InvalidTerm(term.clone()));
        }
        let id = TermId(self.inverse.len() as u64 + 1);
        self.forward.insert(term.clone(), id);
        self.numeric.push(term.integer_value());
        self.inverse.push(term.clone());
        Ok(id)
    }

    /// Looks up an already assigned id without modifying the dictionary.
    pub fn lookup(&self, term: &Term) -> Option<TermId> {
        self.forward.get(term).copied()
    }

    pub fn decode(&self, id: TermId) -> Result<&Term, DictionaryError> {
        if id.is_null() {
            return Err(DictionaryError::NullId);
        }
        self.inverse
            .get(id.0 as usize - 1)
            .ok_or(DictionaryError::UnknownId(id.0))
    }

    /// Integer value of the term behind `id`, when it is an integer literal.
    #[inline]
    pub fn numeric(&self, id: TermId) -> Option<i64> {
        if id.is_null() {
            return None;
        }
        self.numeric.get(id.0 as usize - 1).copied().flatten()
    }

    /// Iterates over `(id, term)` in assignment order.
    pub fn iter(&self) -> impl Iterator<Item = (TermId, &Term)> {
        self.inverse
            .iter()
            .enumerate()
            .map(|(i, t)| (TermId(i as u64 + 1), t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_id_is_one() {
        let mut d = Dictionary::new();
        assert_eq!(d.encode(&Term::iri("http://example.org/Alice")).unwrap(), TermId(1));
    }

    #[test]
    fn encoding_is_idempotent() {
        let mut d = Dictionary::new();
        let t = Term::plain("x");
        let a = d.encode(&t).unwrap();
        let b = d.encode(&t).unwrap();
        assert_eq!(a, b);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn decode_null_and_unknown() {
        let mut d = Dictionary::new();
        let alice = Term::iri("http://example.org/Alice");
        let id = d.encode(&alice).unwrap();
        assert_eq!(d.decode(id).unwrap(), &alice);
        assert_eq!(d.decode(TermId::NULL), Err(DictionaryError::NullId));
        assert_eq!(d.decode(TermId(7)), Err(DictionaryError::UnknownId(7)));
    }

    #[test]
    fn frozen_rejects_new_terms_but_resolves_old_ones() {
        let mut d = Dictionary::new();
        let a = d.encode(&Term::iri("a")).unwrap();
        d.freeze();
        assert_eq!(d.encode(&Term::iri("a")).unwrap(), a);
        assert_eq!(d.encode(&Term::iri("b")), Err(DictionaryError::Frozen));
    }

    #[test]
    fn invalid_terms_are_rejected() {
        let mut d = Dictionary::new();
        assert!(d.encode(&Term::iri("")).is_err());
        assert!(d.encode(&Term::lang("x", "")).is_err());
    }

    #[test]
    fn numeric_side_map() {
        let mut d = Dictionary::new();
        let five = d.encode(&Term::integer(5)).unwrap();
        let int = d.encode(&Term::typed("-3", format!("{XSD}int"))).unwrap();
        let text = d.encode(&Term::plain("5")).unwrap();
        let bad = d.encode(&Term::typed("five", XSD_INTEGER)).unwrap();
        assert_eq!(d.numeric(five), Some(5));
        assert_eq!(d.numeric(int), Some(-3));
        assert_eq!(d.numeric(text), None);
        assert_eq!(d.numeric(bad), None);
        assert_eq!(d.numeric(TermId::NULL), None);
    }

    #[test]
    fn literal_display_escapes() {
        let t = Term::lang("a \"b\"\n", "en");
        assert_eq!(t.to_string(), r#""a \"b\"\n"@en"#);
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        prop_oneof![
            "[a-z]{1,6}".prop_map(|s| Term::iri(format!("http://ex.org/{s}"))),
            "[a-z]{1,4}".prop_map(Term::blank),
            "[a-z ]{0,5}".prop_map(Term::plain),
            ("[a-z]{0,4}", "(en|de)").prop_map(|(s, l)| Term::lang(s, l)),
            any::<i32>().prop_map(|v| Term::integer(v as i64)),
        ]
    }

    proptest! {
        #[test]
        fn round_trip_and_dense_ids(terms in proptest::collection::vec(arb_term(), 1..1000)) {
            let mut d = Dictionary::new();
            let mut first_seen: Vec<Term> = Vec::new();
            for t in &terms {
                let id = d.encode(t).unwrap();
                prop_assert!(!id.is_null());
                prop_assert_eq!(d.decode(id).unwrap(), t);
                if !first_seen.contains(t) {
                    first_seen.push(t.clone());
                    prop_assert_eq!(id.0 as usize, first_seen.len());
                }
            }
            for (id, t) in d.iter() {
                prop_assert_eq!(d.lookup(t), Some(id));
            }
        }
    }
}
