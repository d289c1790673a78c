//! Query language subset: AST and parser.
//!
//! ```text
//! query    := prefix* 'SELECT' 'DISTINCT'? (item+ | '*') 'WHERE'? group
//!             ('GROUP' 'BY' var)? ('LIMIT' int)?
//! item     := var | '(' agg 'AS' var ')'
//! agg      := 'COUNT' '(' 'DISTINCT'? (var | '*') ')' | ('SUM'|'MIN'|'MAX'|'AVG') '(' var ')'
//! group    := '{' (triples | 'FILTER' '(' expr ')' | group ('UNION' group)*)* '}'
//! triples  := term term term ((';' term term) | (',' term))* '.'?
//! expr     := cmp ('&&' cmp)* | 'BOUND' '(' var ')'
//! ```
//!
//! Well-known SPARQL constructs outside the subset (OPTIONAL, property
//! paths, ...) are reported as [`QueryError::Unsupported`] rather than as
//! syntax errors.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::aggregate::AggFunc;
use crate::dictionary::{Term, XSD, XSD_DECIMAL, XSD_INTEGER};
use crate::expr::CompareOp;

pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const DEFAULT_PREFIX: &str = "http://example.org/";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("parse error at {line}:{col}: {message}{}", expected_suffix(.expected))]
    Parse {
        line: usize,
        col: usize,
        message: String,
        expected: Vec<String>,
    },
    #[error("unsupported feature at {line}:{col}: {feature}")]
    Unsupported { feature: String, line: usize, col: usize },
    #[error("invalid query: {0}")]
    Invalid(String),
}

fn expected_suffix(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", expected.join(" or "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TermOrVar {
    Var(String),
    Term(Term),
}

impl TermOrVar {
    pub fn var(&self) -> Option<&str> {
        match self {
            TermOrVar::Var(v) => Some(v),
            TermOrVar::Term(_) => None,
        }
    }
}

impl fmt::Display for TermOrVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermOrVar::Var(v) => write!(f, "?{v}"),
            TermOrVar::Term(t) => write!(f, "{}", short_term(t)),
        }
    }
}

/// Compact rendering used in plan labels: prefixed names where a known prefix applies.
pub fn short_term(t: &Term) -> String {
    match t {
        Term::Iri(s) => {
            for (p, ns) in [("", DEFAULT_PREFIX), ("rdf", RDF), ("rdfs", RDFS), ("xsd", XSD)] {
                if let Some(local) = s.strip_prefix(ns) {
                    if !local.is_empty() && local.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') {
                        return format!("{p}:{local}");
                    }
                }
            }
            format!("<{s}>")
        }
        other => match other.integer_value() {
            Some(v) => v.to_string(),
            None => other.to_string(),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternAst {
    pub s: TermOrVar,
    pub p: TermOrVar,
    pub o: TermOrVar,
}

impl fmt::Display for PatternAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}, {}", self.s, self.p, self.o)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprAst {
    Compare {
        op: CompareOp,
        left: TermOrVar,
        right: TermOrVar,
    },
    Bound(String),
}

impl ExprAst {
    pub fn vars(&self) -> Vec<&str> {
        match self {
            ExprAst::Compare { left, right, .. } => [left, right].into_iter().filter_map(|o| o.var()).collect(),
            ExprAst::Bound(v) => vec![v.as_str()],
        }
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Compare { op, left, right } => write!(f, "{left} {} {right}", op.symbol()),
            ExprAst::Bound(v) => write!(f, "BOUND(?{v})"),
        }
    }
}

/// A `{ ... }` block: triple patterns, filters and UNION blocks, all joined together.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroupPattern {
    pub patterns: Vec<PatternAst>,
    pub filters: Vec<ExprAst>,
    pub unions: Vec<Vec<GroupPattern>>,
}

impl GroupPattern {
    /// Variables that appear anywhere in the block.
    pub fn vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut add = |v: &str| {
            if !out.iter().any(|x| x == v) {
                out.push(v.to_string());
            }
        };
        for p in &self.patterns {
            for t in [&p.s, &p.p, &p.o] {
                if let Some(v) = t.var() {
                    add(v);
                }
            }
        }
        for u in &self.unions {
            for branch in u {
                for v in branch.vars() {
                    add(&v);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregateAst {
    pub func: AggFunc,
    pub arg: Option<String>,
    pub alias: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectItem {
    Var(String),
    Aggregate(AggregateAst),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    /// Empty means `SELECT *`.
    pub select: Vec<SelectItem>,
    pub distinct: bool,
    pub body: GroupPattern,
    pub group_by: Option<String>,
    pub limit: Option<usize>,
}

impl Query {
    pub fn aggregates(&self) -> Vec<&AggregateAst> {
        self.select
            .iter()
            .filter_map(|s| match s {
                SelectItem::Aggregate(a) => Some(a),
                SelectItem::Var(_) => None,
            })
            .collect()
    }

    pub fn is_aggregate(&self) -> bool {
        self.group_by.is_some() || !self.aggregates().is_empty()
    }

    /// Names of the result columns, in order.
    pub fn result_vars(&self) -> Vec<String> {
        if self.select.is_empty() {
            return self.body.vars();
        }
        self.select
            .iter()
            .map(|s| match s {
                SelectItem::Var(v) => v.clone(),
                SelectItem::Aggregate(a) => a.alias.clone(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Var(String),
    Iri(String),
    PName(String, String),
    Blank(String),
    Str(String),
    LangTag(String),
    Number(String),
    Word(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCTS: [&str; 24] = [
    "^^", "&&", "||", "!=", "<=", ">=", "{", "}", "(", ")", ".", ",", ";", "*", "=", "<", ">", "!", "/", "|", "^", "+", "[", "]",
];

fn lex(text: &str) -> Result<Vec<Spanned>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, message: &str| QueryError::Parse {
        line,
        col,
        message: message.to_string(),
        expected: vec![],
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let start = i;
        let tok = if c == '?' || c == '$' {
            i += 1;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            if i == start + 1 {
                // a bare '?' is a path modifier
                Tok::Punct("?")
            } else {
                Tok::Var(chars[start + 1..i].iter().collect())
            }
        } else if c == '<' && looks_like_iri(&chars[i..]) {
            i += 1;
            while i < chars.len() && chars[i] != '>' {
                i += 1;
            }
            let iri: String = chars[start + 1..i].iter().collect();
            i += 1;
            Tok::Iri(iri)
        } else if c == '"' || c == '\'' {
            let quote = c;
            i += 1;
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(err(start_line, start_col, "unterminated string"));
                };
                i += 1;
                if ch == quote {
                    break;
                }
                if ch == '\\' {
                    let e = chars.get(i).copied().unwrap_or(' ');
                    i += 1;
                    s.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        other => other,
                    });
                } else {
                    s.push(ch);
                }
            }
            Tok::Str(s)
        } else if c == '@' {
            i += 1;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '-') {
                i += 1;
            }
            Tok::LangTag(chars[start + 1..i].iter().collect())
        } else if c == '_' && chars.get(i + 1) == Some(&':') {
            i += 2;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                i += 1;
            }
            Tok::Blank(chars[start + 2..i].iter().collect())
        } else if c.is_ascii_digit() || ((c == '-' || c == '+') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || (chars[i] == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))) {
                i += 1;
            }
            Tok::Number(chars[start..i].iter().collect())
        } else if c.is_alphabetic() || c == ':' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                i += 1;
            }
            if chars.get(i) == Some(&':') {
                let prefix: String = chars[start..i].iter().collect();
                i += 1;
                let ls = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '-' || (chars[i] == '.' && chars.get(i + 1).is_some_and(|d| d.is_alphanumeric()))) {
                    i += 1;
                }
                Tok::PName(prefix, chars[ls..i].iter().collect())
            } else {
                Tok::Word(chars[start..i].iter().collect())
            }
        } else {
            let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    i += p.len();
                    Tok::Punct(p)
                }
                None => return Err(err(start_line, start_col, &format!("unexpected character '{c}'"))),
            }
        };
        col += i - start;
        out.push(Spanned {
            tok,
            line: start_line,
            col: start_col,
        });
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Distinguishes `<iri>` from the less-than operator.
fn looks_like_iri(rest: &[char]) -> bool {
    for &c in &rest[1..] {
        match c {
            '>' => return true,
            c if c.is_whitespace() || c == '<' || c == '"' || c == '{' || c == '}' => return false,
            _ => {}
        }
    }
    false
}

const UNSUPPORTED_WORDS: [&str; 17] = [
    "OPTIONAL", "MINUS", "SERVICE", "BIND", "VALUES", "GRAPH", "ORDER", "OFFSET", "HAVING", "EXISTS", "NOT", "CONSTRUCT",
    "ASK", "DESCRIBE", "BASE", "FROM", "SUBSTR",
];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    prefixes: HashMap<String, String>,
}

pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let mut prefixes = HashMap::new();
    prefixes.insert(String::new(), DEFAULT_PREFIX.to_string());
    prefixes.insert("rdf".into(), RDF.into());
    prefixes.insert("rdfs".into(), RDFS.into());
    prefixes.insert("xsd".into(), XSD.into());
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        prefixes,
    };
    let q = p.query()?;
    validate(&q)?;
    Ok(q)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: &str, expected: &[&str]) -> Result<T, QueryError> {
        let (line, col) = self.here();
        Err(QueryError::Parse {
            line,
            col,
            message: message.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn unsupported<T>(&self, feature: &str) -> Result<T, QueryError> {
        let (line, col) = self.here();
        Err(QueryError::Unsupported {
            feature: feature.to_string(),
            line,
            col,
        })
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x.eq_ignore_ascii_case(w))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(x) if *x == p)
    }

    fn check_unsupported_word(&self) -> Result<(), QueryError> {
        if let Tok::Word(w) = self.peek() {
            let up = w.to_ascii_uppercase();
            if UNSUPPORTED_WORDS.contains(&up.as_str()) {
                return self.unsupported(&up);
            }
        }
        Ok(())
    }

    fn expect_word(&mut self, w: &str) -> Result<(), QueryError> {
        if self.is_word(w) {
            self.bump();
            Ok(())
        } else {
            self.check_unsupported_word()?;
            self.fail(&format!("unexpected {}", describe(self.peek())), &[w])
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), QueryError> {
        if self.is_punct(p) {
            self.bump();
            Ok(())
        } else {
            self.check_unsupported_word()?;
            self.fail(&format!("unexpected {}", describe(self.peek())), &[&format!("'{p}'")])
        }
    }

    fn var(&mut self) -> Result<String, QueryError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(v)
            }
            other => self.fail(&format!("unexpected {}", describe(&other)), &["variable"]),
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        while self.is_word("PREFIX") {
            self.bump();
            let prefix = match self.bump() {
                Tok::PName(p, l) if l.is_empty() => p,
                _ => {
                    self.pos -= 1;
                    return self.fail("bad PREFIX declaration", &["prefix name"]);
                }
            };
            match self.bump() {
                Tok::Iri(iri) => {
                    self.prefixes.insert(prefix, iri);
                }
                _ => {
                    self.pos -= 1;
                    return self.fail("bad PREFIX declaration", &["IRI"]);
                }
            }
        }
        self.check_unsupported_word()?;
        self.expect_word("SELECT")?;
        let distinct = if self.is_word("DISTINCT") {
            self.bump();
            true
        } else {
            false
        };
        let mut select = Vec::new();
        if self.is_punct("*") {
            self.bump();
        } else {
            loop {
                match self.peek().clone() {
                    Tok::Var(v) => {
                        self.bump();
                        select.push(SelectItem::Var(v));
                    }
                    Tok::Punct("(") => {
                        self.bump();
                        select.push(SelectItem::Aggregate(self.aggregate()?));
                    }
                    _ => break,
                }
            }
            if select.is_empty() {
                return self.fail("empty projection", &["variable", "'('", "'*'"]);
            }
        }
        if self.is_word("WHERE") {
            self.bump();
        }
        let body = self.group()?;
        let mut group_by = None;
        let mut limit = None;
        loop {
            if self.is_word("GROUP") {
                self.bump();
                self.expect_word("BY")?;
                group_by = Some(self.var()?);
                if matches!(self.peek(), Tok::Var(_)) {
                    return self.unsupported("GROUP BY with several variables");
                }
            } else if self.is_word("LIMIT") {
                self.bump();
                match self.bump() {
                    Tok::Number(n) => match n.parse::<usize>() {
                        Ok(n) => limit = Some(n),
                        Err(_) => {
                            self.pos -= 1;
                            return self.fail("LIMIT needs a non-negative integer", &["integer"]);
                        }
                    },
                    _ => {
                        self.pos -= 1;
                        return self.fail("LIMIT needs a non-negative integer", &["integer"]);
                    }
                }
            } else {
                break;
            }
        }
        if *self.peek() != Tok::Eof {
            self.check_unsupported_word()?;
            return self.fail(&format!("unexpected {}", describe(self.peek())), &["GROUP BY", "LIMIT", "end of query"]);
        }
        Ok(Query {
            select,
            distinct,
            body,
            group_by,
            limit,
        })
    }

    fn aggregate(&mut self) -> Result<AggregateAst, QueryError> {
        let name = match self.peek().clone() {
            Tok::Word(w) => w.to_ascii_uppercase(),
            other => return self.fail(&format!("unexpected {}", describe(&other)), &["aggregate function"]),
        };
        let kind = match name.as_str() {
            "COUNT" => AggFunc::Count,
            "SUM" => AggFunc::Sum,
            "MIN" => AggFunc::Min,
            "MAX" => AggFunc::Max,
            "AVG" => AggFunc::Avg,
            "SAMPLE" | "GROUP_CONCAT" => return self.unsupported(&name),
            _ => return self.fail(&format!("unknown aggregate {name}"), &["COUNT", "SUM", "MIN", "MAX", "AVG"]),
        };
        self.bump();
        self.expect_punct("(")?;
        let mut distinct = false;
        if self.is_word("DISTINCT") {
            self.bump();
            distinct = true;
        }
        let (func, arg) = if self.is_punct("*") {
            if kind != AggFunc::Count || distinct {
                return self.fail("'*' is only allowed in COUNT(*)", &["variable"]);
            }
            self.bump();
            (AggFunc::CountAll, None)
        } else {
            let v = self.var()?;
            let f = match (kind, distinct) {
                (AggFunc::Count, true) => AggFunc::CountDistinct,
                (k, false) => k,
                (_, true) => return self.unsupported("DISTINCT inside aggregates other than COUNT"),
            };
            (f, Some(v))
        };
        self.expect_punct(")")?;
        self.expect_word("AS")?;
        let alias = self.var()?;
        self.expect_punct(")")?;
        Ok(AggregateAst { func, arg, alias })
    }

    fn group(&mut self) -> Result<GroupPattern, QueryError> {
        self.expect_punct("{")?;
        let mut g = GroupPattern::default();
        loop {
            self.check_unsupported_word()?;
            if self.is_punct("}") {
                self.bump();
                return Ok(g);
            }
            if self.is_word("FILTER") {
                self.bump();
                self.filter(&mut g.filters)?;
                if self.is_punct(".") {
                    self.bump();
                }
                continue;
            }
            if self.is_punct("{") {
                let first = self.group()?;
                if !self.is_word("UNION") {
                    // a plain nested block joins with its parent
                    g.patterns.extend(first.patterns);
                    g.filters.extend(first.filters);
                    g.unions.extend(first.unions);
                } else {
                    let mut branches = vec![first];
                    while self.is_word("UNION") {
                        self.bump();
                        branches.push(self.group()?);
                    }
                    g.unions.push(branches);
                }
                if self.is_punct(".") {
                    self.bump();
                }
                continue;
            }
            if *self.peek() == Tok::Eof {
                return self.fail("unexpected end of query", &["'}'"]);
            }
            self.triples(&mut g.patterns)?;
        }
    }

    fn filter(&mut self, out: &mut Vec<ExprAst>) -> Result<(), QueryError> {
        if self.is_word("NOT") || self.is_word("EXISTS") {
            return self.unsupported("EXISTS");
        }
        if self.is_word("BOUND") {
            self.bump();
            self.expect_punct("(")?;
            let v = self.var()?;
            self.expect_punct(")")?;
            out.push(ExprAst::Bound(v));
            return Ok(());
        }
        if let Tok::Word(w) = self.peek() {
            return self.unsupported(&format!("function {}", w.to_ascii_uppercase()));
        }
        self.expect_punct("(")?;
        loop {
            if self.is_word("BOUND") {
                self.bump();
                self.expect_punct("(")?;
                out.push(ExprAst::Bound(self.var()?));
                self.expect_punct(")")?;
            } else if self.is_punct("!") {
                return self.unsupported("negation in FILTER");
            } else if let Tok::Word(w) = self.peek() {
                return self.unsupported(&format!("function {}", w.to_ascii_uppercase()));
            } else {
                let left = self.operand()?;
                let op = match self.peek() {
                    Tok::Punct("=") => CompareOp::Eq,
                    Tok::Punct("!=") => CompareOp::Ne,
                    Tok::Punct("<") => CompareOp::Lt,
                    Tok::Punct("<=") => CompareOp::Le,
                    Tok::Punct(">") => CompareOp::Gt,
                    Tok::Punct(">=") => CompareOp::Ge,
                    other => {
                        let d = describe(other);
                        return self.fail(&format!("unexpected {d}"), &["comparison operator"]);
                    }
                };
                self.bump();
                let right = self.operand()?;
                out.push(ExprAst::Compare { op, left, right });
            }
            if self.is_punct("&&") {
                self.bump();
                continue;
            }
            if self.is_punct("||") {
                return self.unsupported("disjunction in FILTER");
            }
            break;
        }
        self.expect_punct(")")
    }

    fn operand(&mut self) -> Result<TermOrVar, QueryError> {
        self.term(false)
    }

    fn term(&mut self, predicate: bool) -> Result<TermOrVar, QueryError> {
        let tok = self.peek().clone();
        let t = match tok {
            Tok::Var(v) => TermOrVar::Var(v),
            Tok::Iri(i) => TermOrVar::Term(Term::iri(i)),
            Tok::PName(p, l) => match self.prefixes.get(&p) {
                Some(ns) => TermOrVar::Term(Term::iri(format!("{ns}{l}"))),
                None => return self.fail(&format!("unknown prefix '{p}:'"), &[]),
            },
            Tok::Blank(b) => TermOrVar::Term(Term::blank(b)),
            Tok::Word(w) if predicate && w == "a" => TermOrVar::Term(Term::iri(format!("{RDF}type"))),
            Tok::Word(w) if w == "true" || w == "false" => TermOrVar::Term(Term::typed(w, format!("{XSD}boolean"))),
            Tok::Number(n) => {
                let dt = if n.contains('.') { XSD_DECIMAL } else { XSD_INTEGER };
                TermOrVar::Term(Term::typed(n.trim_start_matches('+'), dt))
            }
            Tok::Str(s) => {
                self.bump();
                let t = match self.peek().clone() {
                    Tok::LangTag(l) => {
                        self.bump();
                        Term::lang(s, l)
                    }
                    Tok::Punct("^^") => {
                        self.bump();
                        match self.term(false)? {
                            TermOrVar::Term(Term::Iri(dt)) => Term::typed(s, dt),
                            _ => return self.fail("datatype must be an IRI", &["IRI"]),
                        }
                    }
                    _ => Term::plain(s),
                };
                return Ok(TermOrVar::Term(t));
            }
            Tok::Punct("(") | Tok::Punct("[") => return self.unsupported("collections and blank node property lists"),
            other => {
                self.check_unsupported_word()?;
                return self.fail(&format!("unexpected {}", describe(&other)), &["variable", "IRI", "literal"]);
            }
        };
        self.bump();
        Ok(t)
    }

    fn check_path(&self) -> Result<(), QueryError> {
        if ["/", "|", "^", "*", "+", "?"].iter().any(|p| self.is_punct(p)) {
            return self.unsupported("property paths");
        }
        Ok(())
    }

    fn triples(&mut self, out: &mut Vec<PatternAst>) -> Result<(), QueryError> {
        if self.is_punct("^") {
            return self.unsupported("property paths");
        }
        let s = self.term(false)?;
        loop {
            if self.is_punct("^") || self.is_punct("!") {
                return self.unsupported("property paths");
            }
            let p = self.term(true)?;
            self.check_path()?;
            loop {
                let o = self.term(false)?;
                out.push(PatternAst { s: s.clone(), p: p.clone(), o });
                if self.is_punct(",") {
                    self.bump();
                    continue;
                }
                break;
            }
            if self.is_punct(";") {
                self.bump();
                if self.is_punct(".") || self.is_punct("}") {
                    break;
                }
                continue;
            }
            break;
        }
        if self.is_punct(".") {
            self.bump();
        } else if !self.is_punct("}") && !self.is_word("FILTER") && !self.is_punct("{") {
            self.check_unsupported_word()?;
            return self.fail(&format!("unexpected {}", describe(self.peek())), &["'.'", "'}'"]);
        }
        Ok(())
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Var(v) => format!("variable ?{v}"),
        Tok::Iri(i) => format!("IRI <{i}>"),
        Tok::PName(p, l) => format!("name {p}:{l}"),
        Tok::Blank(b) => format!("blank node _:{b}"),
        Tok::Str(_) => "string literal".into(),
        Tok::LangTag(l) => format!("language tag @{l}"),
        Tok::Number(n) => format!("number {n}"),
        Tok::Word(w) => format!("'{w}'"),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::Eof => "end of query".into(),
    }
}

fn validate(q: &Query) -> Result<(), QueryError> {
    let body_vars = q.body.vars();
    let in_body = |v: &str| body_vars.iter().any(|x| x == v);
    if let Some(g) = &q.group_by {
        if !in_body(g) {
            return Err(QueryError::Invalid(format!("GROUP BY variable ?{g} does not occur in the pattern")));
        }
    }
    if q.is_aggregate() {
        if q.select.is_empty() {
            return Err(QueryError::Invalid("SELECT * cannot be combined with aggregation".into()));
        }
        for item in &q.select {
            if let SelectItem::Var(v) = item {
                if q.group_by.as_deref() != Some(v.as_str()) {
                    return Err(QueryError::Invalid(format!("?{v} is selected but not grouped")));
                }
            }
        }
    }
    let mut names: Vec<&str> = Vec::new();
    for item in &q.select {
        let name = match item {
            SelectItem::Var(v) => v.as_str(),
            SelectItem::Aggregate(a) => {
                if in_body(&a.alias) {
                    return Err(QueryError::Invalid(format!("alias ?{} is already used in the pattern", a.alias)));
                }
                a.alias.as_str()
            }
        };
        if names.contains(&name) {
            return Err(QueryError::Invalid(format!("?{name} is selected twice")));
        }
        names.push(name);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const TWO_HOP: &str = "SELECT (COUNT(*) AS ?count) {
    ?person1 :knows ?person2 .
    ?person2 :knows ?person3 .
    ?person3 :interest ?tag .
    FILTER(?person1 != ?person3)
}";

    #[test]
    fn two_hop_query_shape() {
        let q = parse_query(TWO_HOP).unwrap();
        assert_eq!(q.body.patterns.len(), 3);
        assert_eq!(q.body.filters.len(), 1);
        assert_eq!(q.aggregates().len(), 1);
        assert_eq!(q.aggregates()[0].func, AggFunc::CountAll);
        assert!(q.group_by.is_none());
        assert_eq!(q.body.patterns[0].p, TermOrVar::Term(Term::iri("http://example.org/knows")));
    }

    #[test]
    fn select_star() {
        let q = parse_query("SELECT * { ?s ?p ?o }").unwrap();
        assert!(q.select.is_empty());
        assert_eq!(q.body.patterns.len(), 1);
        assert_eq!(q.result_vars(), ["s", "p", "o"]);
    }

    #[test]
    fn optional_is_unsupported() {
        let e = parse_query("SELECT * { ?s ?p ?o OPTIONAL { ?s :x ?y } }").unwrap_err();
        assert!(matches!(e, QueryError::Unsupported { ref feature, .. } if feature == "OPTIONAL"), "{e}");
    }

    #[test]
    fn property_path_is_unsupported() {
        let e = parse_query("SELECT * { ?s :knows/:knows ?o }").unwrap_err();
        assert!(matches!(e, QueryError::Unsupported { .. }), "{e}");
        let e = parse_query("SELECT * { ?s :knows+ ?o }").unwrap_err();
        assert!(matches!(e, QueryError::Unsupported { .. }), "{e}");
    }

    #[test]
    fn parse_error_has_position() {
        let e = parse_query("SELECT *\n{ ?s ?p }").unwrap_err();
        match e {
            QueryError::Parse { line, col, .. } => assert_eq!((line, col), (2, 9)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn union_group_by_limit() {
        let q = parse_query(
            "PREFIX ex: <http://ex/>
             SELECT DISTINCT ?a { { ?a ex:p ?b } UNION { ?b ex:q ?a } ?a a ex:T } GROUP BY ?a LIMIT 5",
        );
        let q = q.unwrap();
        assert!(q.distinct);
        assert_eq!(q.body.unions.len(), 1);
        assert_eq!(q.body.unions[0].len(), 2);
        assert_eq!(q.body.patterns[0].p, TermOrVar::Term(Term::iri(format!("{RDF}type"))));
        assert_eq!(q.limit, Some(5));
    }

    #[test]
    fn literals_and_lists() {
        let q = parse_query(r#"SELECT * { ?s :name "Bob"@en , "x\"y" ; :age 42 ; :w "1"^^xsd:integer . FILTER(?s != :a && ?s < 10) }"#).unwrap();
        assert_eq!(q.body.patterns.len(), 4);
        assert_eq!(q.body.patterns[0].o, TermOrVar::Term(Term::lang("Bob", "en")));
        assert_eq!(q.body.patterns[1].o, TermOrVar::Term(Term::plain("x\"y")));
        assert_eq!(q.body.patterns[2].o, TermOrVar::Term(Term::integer(42)));
        assert_eq!(q.body.patterns[3].o, TermOrVar::Term(Term::integer(1)));
        assert_eq!(q.body.filters.len(), 2);
    }

    #[test]
    fn semantic_checks() {
        assert!(matches!(parse_query("SELECT ?x (COUNT(*) AS ?c) { ?x :p ?y }"), Err(QueryError::Invalid(_))));
        assert!(matches!(parse_query("SELECT ?z { ?x :p ?y } GROUP BY ?z"), Err(QueryError::Invalid(_))));
        assert!(parse_query("SELECT ?x (COUNT(DISTINCT ?y) AS ?c) { ?x :p ?y } GROUP BY ?x").is_ok());
    }

    #[test]
    fn disjunction_unsupported() {
        let e = parse_query("SELECT * { ?s ?p ?o FILTER(?s = :a || ?s = :b) }").unwrap_err();
        assert!(matches!(e, QueryError::Unsupported { .. }));
    }
}
